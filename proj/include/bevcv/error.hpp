#pragma once

#include <stdexcept>
#include <string>

namespace bevcv {

// Errors fall in two families so callers (the CLI in particular) can map
// them to exit codes: bad input values vs. unreadable/unwritable files.
enum class ErrorFamily { kValidation, kIo };

class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, const std::string& what)
      : std::runtime_error(what), family_(family) {}
  ErrorFamily family() const noexcept { return family_; }

 private:
  ErrorFamily family_;
};

#define BEVCV_DEFINE_ERROR(Name, Family)                                   \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what)                                 \
        : Error(ErrorFamily::Family, std::string(#Name ": ") + what) {}    \
  };

BEVCV_DEFINE_ERROR(IoError, kIo)
BEVCV_DEFINE_ERROR(MalformedImage, kIo)
BEVCV_DEFINE_ERROR(UnsupportedFormat, kIo)
BEVCV_DEFINE_ERROR(MalformedFile, kIo)

BEVCV_DEFINE_ERROR(InvalidArgument, kValidation)
BEVCV_DEFINE_ERROR(InvalidPartition, kValidation)
BEVCV_DEFINE_ERROR(ShapeMismatch, kValidation)
BEVCV_DEFINE_ERROR(DegenerateBatch, kValidation)
BEVCV_DEFINE_ERROR(DuplicateId, kValidation)
BEVCV_DEFINE_ERROR(DimensionMismatch, kValidation)
BEVCV_DEFINE_ERROR(MissingTruth, kValidation)
BEVCV_DEFINE_ERROR(DuplicateTensorName, kValidation)

#undef BEVCV_DEFINE_ERROR

// Raised for malformed text inputs (manifests, JSON configs). Carries the
// 1-based line number when one is known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(ErrorFamily::kValidation,
              line ? "ParseError: line " + std::to_string(line) + ": " + what
                   : "ParseError: " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(ErrorFamily::kValidation,
              "ValidationError: " + field + ": " + what),
        field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bevcv
