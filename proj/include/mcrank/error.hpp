#pragma once

#include <stdexcept>
#include <string>

namespace mcrank {

/// Raised when input data (files, ids, judgments) violates a format or
/// referential invariant. Parameter misuse is reported with
/// std::invalid_argument instead.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A DataError tied to a specific line of an input file.
class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mcrank
