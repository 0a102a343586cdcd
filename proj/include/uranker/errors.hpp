#pragma once

#include <stdexcept>
#include <string>

namespace uranker {

/// Base of every error thrown by the library. `code()` is a short
/// machine-readable tag used by the CLI's one-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& m) : Error("invalid_input", m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape_error", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& m) : Error("load_error", m) {}
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& m) : Error("diverged", m) {}
};

}  // namespace uranker
