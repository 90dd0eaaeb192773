#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ae {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value does not fit the cell width, or a malformed numeric literal.
struct RangeError : Error {
  using Error::Error;
};

struct DivisionByZero : Error {
  DivisionByZero() : Error("division by zero") {}
};

// Text-format error tied to a 1-based source line (0 when not tied to one).
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& msg)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ae
