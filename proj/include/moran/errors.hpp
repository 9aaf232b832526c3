#pragma once

#include <stdexcept>
#include <string>

namespace moran {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MORAN_DEFINE_ERROR(Name)        \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

MORAN_DEFINE_ERROR(OverlapError);
MORAN_DEFINE_ERROR(EmptyBlockError);
MORAN_DEFINE_ERROR(GroundMismatchError);
MORAN_DEFINE_ERROR(NotSubsetError);
MORAN_DEFINE_ERROR(NotComparableError);
MORAN_DEFINE_ERROR(NotOrderedPartitionError);
MORAN_DEFINE_ERROR(NegativeWeightError);
MORAN_DEFINE_ERROR(ZeroMeasureError);
MORAN_DEFINE_ERROR(SampleTooLargeError);
MORAN_DEFINE_ERROR(InvalidInitialError);
MORAN_DEFINE_ERROR(ShapeError);
MORAN_DEFINE_ERROR(ParseError);
MORAN_DEFINE_ERROR(ValidationError);

/// Raised when an exact engine would exceed its configured size cap.
class SizeCapError : public Error {
 public:
  using Error::Error;
};

#undef MORAN_DEFINE_ERROR

}  // namespace moran
