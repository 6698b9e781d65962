#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rmboc {

// Base of every error the simulator raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidAddress : public Error {
 public:
  using Error::Error;
};

class NoFreeSegment : public Error {
 public:
  NoFreeSegment() : Error("no free bus segment on link") {}
};

class NotConnected : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scenario text errors carry the 1-based line they were found on.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class AddressError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace rmboc
