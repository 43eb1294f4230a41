#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spare {

// Base class for all toolkit errors. Absence of a value (missing answer,
// empty pair set, failed annotation) is never an exception; only contract
// violations and unrecoverable backend conditions throw.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// core
class EmptyOutput : public Error {
 public:
  using Error::Error;
};

// judge
class InsufficientPool : public Error {
 public:
  InsufficientPool(std::size_t available, std::size_t requested)
      : Error("exemplar pool has " + std::to_string(available) +
              " eligible entries, need " + std::to_string(requested)),
        available(available),
        requested(requested) {}
  std::size_t available;
  std::size_t requested;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class MalformedBackendReply : public Error {
 public:
  using Error::Error;
};

// annotate
class ParseFailure : public Error {
 public:
  using Error::Error;
};

class SchemaViolation : public Error {
 public:
  using Error::Error;
};

// supervise
class EmptyAnnotation : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t lhs, std::size_t rhs)
      : Error("length mismatch: " + std::to_string(lhs) + " vs " +
              std::to_string(rhs)) {}
};

class InsufficientClass : public Error {
 public:
  InsufficientClass(std::string which, std::size_t available,
                    std::size_t requested)
      : Error("class '" + which + "' has " + std::to_string(available) +
              " members, need " + std::to_string(requested)),
        which(std::move(which)),
        available(available),
        requested(requested) {}
  std::string which;
  std::size_t available;
  std::size_t requested;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

// select
class EmptySequence : public Error {
 public:
  using Error::Error;
};

class NoAnswers : public Error {
 public:
  using Error::Error;
};

class CountMismatch : public Error {
 public:
  CountMismatch(std::size_t expected, std::size_t got)
      : Error("expected " + std::to_string(expected) + " step scores, got " +
              std::to_string(got)),
        expected(expected),
        got(got) {}
  std::size_t expected;
  std::size_t got;
};

// evalqa
class UnknownLabel : public Error {
 public:
  using Error::Error;
};

class EmptyComparison : public Error {
 public:
  using Error::Error;
};

// cli / pipeline
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics)
      : Error(join(diagnostics)), diagnostics(std::move(diagnostics)) {}
  std::vector<std::string> diagnostics;

 private:
  static std::string join(const std::vector<std::string>& ds) {
    std::string out = "invalid config";
    for (const auto& d : ds) out += "\n  - " + d;
    return out;
  }
};

class MissingArtifact : public Error {
 public:
  MissingArtifact(std::string stage, const std::string& path)
      : Error("stage '" + stage + "' requires missing artifact " + path),
        stage(std::move(stage)) {}
  std::string stage;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

}  // namespace spare
