#pragma once

#include <stdexcept>
#include <string>

namespace anycq {

// Malformed or inconsistent input data (files, queries, vocabularies).
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure with position information.
struct ParseError : DataError {
  ParseError(const std::string& msg, int line, int column)
      : DataError(msg), line(line), column(column) {}
  int line;
  int column;
};

}  // namespace anycq
