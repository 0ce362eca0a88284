#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ktransfer {

// Malformed input file. Line numbers are 1-based and count the header row.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column '" + column + "': " + what),
        line_(line),
        column_(std::move(column)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

// A log row references a question or KC that the registry does not know.
class ReferentialError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature-space mismatch: wrong dimension, fingerprint or block layout.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SequencingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ktransfer
