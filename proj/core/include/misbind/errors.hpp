#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace misbind {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent run configuration. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A stage was asked to run without its input artifacts. CLI exit code 3.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Malformed input line; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// A record violates a schema invariant; names the field and record id.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& record_id, const std::string& field,
                  const std::string& what)
      : Error("record '" + record_id + "' field '" + field + "': " + what),
        record_id_(record_id),
        field_(field) {}

  const std::string& record_id() const { return record_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string record_id_;
  std::string field_;
};

/// An operation was invoked outside its stated contract.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// All retries against a backend were exhausted. CLI exit code 4.
class BackendUnavailableError : public Error {
 public:
  BackendUnavailableError(const std::string& backend_id, int attempts,
                          const std::string& what)
      : Error("backend '" + backend_id + "' unavailable after " +
              std::to_string(attempts) + " attempt(s): " + what),
        attempts_(attempts) {}

  int attempts() const { return attempts_; }

 private:
  int attempts_ = 0;
};

/// The backend answered with a non-retryable 4xx; carries the body.
class RequestRejectedError : public Error {
 public:
  RequestRejectedError(int status, const std::string& body)
      : Error("request rejected with status " + std::to_string(status) + ": " + body),
        status_(status),
        body_(body) {}

  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_ = 0;
  std::string body_;
};

/// A judge reply could not be parsed into the required format.
class JudgeFormatError : public Error {
 public:
  using Error::Error;
};

/// A rate has an empty denominator (e.g. a fully unscored filter column).
class UndefinedRateError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (unwritable path, missing file, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace misbind
