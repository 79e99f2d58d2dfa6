#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnnhls {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised by the streaming engine and the cycle simulator when a pipeline
// cannot make progress or leaves items behind in a FIFO.
class DataflowError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnnhls
