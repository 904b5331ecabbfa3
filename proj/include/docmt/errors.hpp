#pragma once

#include <stdexcept>
#include <string>

namespace docmt {

// Base of every library error. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DOCMT_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

DOCMT_DEFINE_ERROR(DimensionError)
DOCMT_DEFINE_ERROR(NumericError)
DOCMT_DEFINE_ERROR(VocabularyError)
DOCMT_DEFINE_ERROR(ValidationError)
DOCMT_DEFINE_ERROR(ParseError)
DOCMT_DEFINE_ERROR(AnnotationError)
DOCMT_DEFINE_ERROR(ArchitectureError)
DOCMT_DEFINE_ERROR(LengthError)
DOCMT_DEFINE_ERROR(ContextError)
DOCMT_DEFINE_ERROR(ConfigError)
DOCMT_DEFINE_ERROR(TraceError)
DOCMT_DEFINE_ERROR(CoverageError)
DOCMT_DEFINE_ERROR(CheckpointError)
DOCMT_DEFINE_ERROR(PairingError)

#undef DOCMT_DEFINE_ERROR

}  // namespace docmt
