#include "anycq/instances.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "anycq/errors.hpp"

namespace anycq {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, int line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON", line_no, 1);
  if (!j.is_object()) throw ParseError("instance record must be an object", line_no, 1);
  return j;
}

DNFQuery query_field(const json& j, int line_no) {
  if (!j.contains("query") || !j["query"].is_string())
    throw ParseError("missing string field \"query\"", line_no, 1);
  try {
    return parse_query(j["query"].get<std::string>());
  } catch (const ParseError& e) {
    throw ParseError(std::string("bad query: ") + e.what(), line_no, 1);
  }
}

std::vector<std::string> string_list(const json& j, const char* key, int line_no) {
  if (!j.contains(key) || !j[key].is_array())
    throw ParseError(std::string("missing array field \"") + key + "\"", line_no, 1);
  std::vector<std::string> out;
  for (const auto& x : j[key]) {
    if (!x.is_string())
      throw ParseError(std::string("field \"") + key + "\" holds a non-string", line_no, 1);
    out.push_back(x.get<std::string>());
  }
  return out;
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(parse_line(line, line_no), line_no);
  }
}

}  // namespace

std::vector<QACInstance> read_qac(std::istream& in) {
  std::vector<QACInstance> out;
  for_each_record(in, [&](const json& j, int line_no) {
    QACInstance inst;
    inst.query = query_field(j, line_no);
    inst.correct = string_list(j, "correct", line_no);
    inst.wrong = string_list(j, "wrong", line_no);
    inst.hard = string_list(j, "hard", line_no);
    std::unordered_set<std::string> correct(inst.correct.begin(), inst.correct.end());
    for (const auto& h : inst.hard)
      if (!correct.count(h))
        throw ParseError("hard answer \"" + h + "\" missing from correct", line_no, 1);
    out.push_back(std::move(inst));
  });
  return out;
}

std::vector<QARInstance> read_qar(std::istream& in) {
  std::vector<QARInstance> out;
  for_each_record(in, [&](const json& j, int line_no) {
    QARInstance inst;
    inst.query = query_field(j, line_no);
    if (!j.contains("answers") || !j["answers"].is_array())
      throw ParseError("missing array field \"answers\"", line_no, 1);
    const std::size_t arity = inst.query.free_vars().size();
    for (const auto& t : j["answers"]) {
      if (!t.is_array()) throw ParseError("answer tuples must be arrays", line_no, 1);
      std::vector<std::string> tuple;
      for (const auto& x : t) {
        if (!x.is_string()) throw ParseError("answer entries must be strings", line_no, 1);
        tuple.push_back(x.get<std::string>());
      }
      if (tuple.size() != arity)
        throw ParseError("answer tuple arity does not match the query", line_no, 1);
      inst.answers.push_back(std::move(tuple));
    }
    if (!j.contains("has_trivial") || !j["has_trivial"].is_boolean())
      throw ParseError("missing boolean field \"has_trivial\"", line_no, 1);
    inst.has_trivial = j["has_trivial"].get<bool>();
    out.push_back(std::move(inst));
  });
  return out;
}

void write_qac(std::ostream& out, const std::vector<QACInstance>& instances) {
  for (const QACInstance& inst : instances) {
    json j;
    j["query"] = print_query(inst.query);
    j["correct"] = inst.correct;
    j["wrong"] = inst.wrong;
    j["hard"] = inst.hard;
    out << j.dump() << '\n';
  }
}

void write_qar(std::ostream& out, const std::vector<QARInstance>& instances) {
  for (const QARInstance& inst : instances) {
    json j;
    j["query"] = print_query(inst.query);
    j["answers"] = inst.answers;
    j["has_trivial"] = inst.has_trivial;
    out << j.dump() << '\n';
  }
}

std::vector<QACInstance> read_qac_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file: " + path);
  return read_qac(in);
}

std::vector<QARInstance> read_qar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file: " + path);
  return read_qar(in);
}

void write_qac_file(const std::string& path, const std::vector<QACInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open instance file for writing: " + path);
  write_qac(out, instances);
}

void write_qar_file(const std::string& path, const std::vector<QARInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open instance file for writing: " + path);
  write_qar(out, instances);
}

}  // namespace anycq
