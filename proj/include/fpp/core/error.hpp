#pragma once

#include <stdexcept>
#include <string>

namespace fpp {

/// Base of every error the library raises. `category()` is a short
/// machine-parsable tag ("parameter", "format", ...) used by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define FPP_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  };

FPP_DEFINE_ERROR(ParameterError, "parameter")
FPP_DEFINE_ERROR(StructuralError, "structural")
FPP_DEFINE_ERROR(ValidationError, "validation")
FPP_DEFINE_ERROR(IoError, "io")
FPP_DEFINE_ERROR(ConvergenceError, "convergence")
FPP_DEFINE_ERROR(CompletionBackendError, "completion-backend")
FPP_DEFINE_ERROR(ProtocolError, "protocol")
FPP_DEFINE_ERROR(EmptyMaskError, "empty-mask")
FPP_DEFINE_ERROR(EmptyRegionError, "empty-region")
FPP_DEFINE_ERROR(UsageError, "usage")

#undef FPP_DEFINE_ERROR

/// Malformed input text or file. Carries the 1-based line number when known
/// (0 otherwise) and the offending field name when one applies.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message, std::size_t line = 0, std::string field = {})
      : Error("format", decorate(message, line, field)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string decorate(const std::string& message, std::size_t line, const std::string& field) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    return out + message;
  }

  std::size_t line_;
  std::string field_;
};

/// Error raised inside a pipeline stage; keeps the inner category and names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.category(), "[" + stage + "] " + inner.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fpp
