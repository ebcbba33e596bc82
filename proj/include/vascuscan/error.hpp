#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace vascuscan {

/// Broad failure class; the CLI maps these onto exit codes.
enum class ErrorKind {
  Validation,   ///< bad input, malformed file, violated precondition
  Computation,  ///< failure while computing on valid input
};

/// Base error for the library. Carries a short machine-readable code and a
/// flat string map of context entries (file names, indices, sizes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message,
        std::map<std::string, std::string> context = {})
      : std::runtime_error(message),
        kind_(kind),
        code_(std::move(code)),
        context_(std::move(context)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  const std::map<std::string, std::string>& context() const noexcept { return context_; }
  std::map<std::string, std::string>& context() noexcept { return context_; }

 private:
  ErrorKind kind_;
  std::string code_;
  std::map<std::string, std::string> context_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& message,
                  std::map<std::string, std::string> context = {})
      : Error(ErrorKind::Validation, std::move(code), message, std::move(context)) {}
};

class ComputationError : public Error {
 public:
  ComputationError(std::string code, const std::string& message,
                   std::map<std::string, std::string> context = {})
      : Error(ErrorKind::Computation, std::move(code), message, std::move(context)) {}
};

/// Raised when a tensor value or gradient stops being finite.
class NonFiniteError : public ComputationError {
 public:
  explicit NonFiniteError(const std::string& where)
      : ComputationError("non_finite", "non-finite value produced by " + where, {{"op", where}}) {}
};

/// A seed's connected component holds fewer vertices than the requested
/// cloud size.
class UndersizedComponentError : public ValidationError {
 public:
  UndersizedComponentError(std::size_t component_size, std::size_t requested)
      : ValidationError("undersized_component",
                        "connected component has " + std::to_string(component_size) +
                            " vertices, cloud needs " + std::to_string(requested),
                        {{"component_size", std::to_string(component_size)},
                         {"requested", std::to_string(requested)}}),
        component_size_(component_size) {}

  std::size_t component_size() const noexcept { return component_size_; }

 private:
  std::size_t component_size_;
};

}  // namespace vascuscan
