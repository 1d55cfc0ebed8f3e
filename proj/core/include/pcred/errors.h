#ifndef PCRED_ERRORS_H_
#define PCRED_ERRORS_H_

#include <stdexcept>
#include <string>

namespace pcred {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant, e.g. a gold index outside the aligned range.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcred

#endif  // PCRED_ERRORS_H_
