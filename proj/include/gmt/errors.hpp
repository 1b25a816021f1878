#pragma once

#include <stdexcept>
#include <string>

namespace gmt {

// Base of all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments or inconsistent configuration (CLI exit code 2).
struct UsageError : Error {
  using Error::Error;
};

// Broken files, schemas or datasets (CLI exit code 3).
struct DataError : Error {
  using Error::Error;
};

// Numerical failure (CLI exit code 4).
struct NumericError : Error {
  using Error::Error;
};

#define GMT_DEFINE_ERROR(name, base)    \
  struct name : base {                  \
    using base::base;                   \
    name() : base(#name) {}             \
  }

// geometry
GMT_DEFINE_ERROR(DegenerateRotation, NumericError);
GMT_DEFINE_ERROR(NotARotation, NumericError);

// pointscene
GMT_DEFINE_ERROR(EmptyRegion, UsageError);
GMT_DEFINE_ERROR(BadCount, UsageError);
GMT_DEFINE_ERROR(MissingFeatures, UsageError);

// encoders / fusion
GMT_DEFINE_ERROR(EmptyHistory, UsageError);
GMT_DEFINE_ERROR(EmptyCloud, UsageError);
GMT_DEFINE_ERROR(EmptyDescription, UsageError);
GMT_DEFINE_ERROR(AllTokensMasked, UsageError);
GMT_DEFINE_ERROR(LengthMismatch, UsageError);
GMT_DEFINE_ERROR(ConfigMismatch, UsageError);

// training / metrics
GMT_DEFINE_ERROR(TooShort, UsageError);
GMT_DEFINE_ERROR(EmptyFuture, UsageError);
GMT_DEFINE_ERROR(NoMotion, UsageError);
GMT_DEFINE_ERROR(EmptySequence, UsageError);
GMT_DEFINE_ERROR(TooFewSamples, UsageError);
GMT_DEFINE_ERROR(NonFiniteLoss, NumericError);

// datagen
GMT_DEFINE_ERROR(AllStatic, NumericError);
GMT_DEFINE_ERROR(NoClearPath, NumericError);

// io
GMT_DEFINE_ERROR(SchemaError, DataError);
GMT_DEFINE_ERROR(IoError, DataError);

#undef GMT_DEFINE_ERROR

}  // namespace gmt
