#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pdd {

// Every failure the library reports derives from Error, so callers can catch
// one type at a boundary (CLI, fuzz harness) and still branch on the subtype.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Smoothed TPOT divides by L-1; callers with L == 1 take the no-display path.
class AmortizationUndefined : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class LengthError : public CodecError {
 public:
  using CodecError::CodecError;
};

class ProtocolError : public Error {
 public:
  ProtocolError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class StallError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : Error(key_path + ": " + what), key_path_(std::move(key_path)) {}

  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdd
