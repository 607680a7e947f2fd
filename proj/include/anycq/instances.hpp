#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "anycq/query.hpp"

namespace anycq {

// One classification instance: candidate answers to accept or reject.
struct QACInstance {
  DNFQuery query;  // one free variable in generated data
  std::vector<std::string> correct;
  std::vector<std::string> wrong;
  std::vector<std::string> hard;  // subset of correct, unreachable in the observable graph
};

// One retrieval instance with its full answer set over the complete graph.
struct QARInstance {
  DNFQuery query;
  std::vector<std::vector<std::string>> answers;
  bool has_trivial = false;  // answerable already in the observable graph
};

// Line-delimited JSON. QAC: {"query": <grammar string>, "correct": [...],
// "wrong": [...], "hard": [...]}; QAR: {"query": ..., "answers": [[...]],
// "has_trivial": bool}. Readers validate shape and raise ParseError with the
// offending line number.
std::vector<QACInstance> read_qac(std::istream& in);
std::vector<QACInstance> read_qac_file(const std::string& path);
void write_qac(std::ostream& out, const std::vector<QACInstance>& instances);
void write_qac_file(const std::string& path, const std::vector<QACInstance>& instances);

std::vector<QARInstance> read_qar(std::istream& in);
std::vector<QARInstance> read_qar_file(const std::string& path);
void write_qar(std::ostream& out, const std::vector<QARInstance>& instances);
void write_qar_file(const std::string& path, const std::vector<QARInstance>& instances);

}  // namespace anycq
