#pragma once

#include <stdexcept>
#include <string>

namespace dpost {

// Root of every error this library throws. Callers that only need a message
// catch this; callers that branch on the failure catch the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DPOST_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// corpus
DPOST_DEFINE_ERROR(NoAnswerMarker);
DPOST_DEFINE_ERROR(UnparseableAnswer);
DPOST_DEFINE_ERROR(DataError);

// calcdecode
DPOST_DEFINE_ERROR(ParseError);
DPOST_DEFINE_ERROR(DivisionByZero);

// engine
DPOST_DEFINE_ERROR(ContextOverflow);
DPOST_DEFINE_ERROR(CheckpointError);

// training
DPOST_DEFINE_ERROR(NonFiniteLoss);
DPOST_DEFINE_ERROR(DivergenceDetected);

// selftrain
DPOST_DEFINE_ERROR(EmptyPreferenceData);

// cli
DPOST_DEFINE_ERROR(ConfigError);

#undef DPOST_DEFINE_ERROR

}  // namespace dpost
