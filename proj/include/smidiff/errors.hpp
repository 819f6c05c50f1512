//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_ERRORS_HPP_
#define SMIDIFF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace smidiff {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SMIDIFF_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

// Tokenizer / sequence layout.
SMIDIFF_DEFINE_ERROR(TokenizeError);
SMIDIFF_DEFINE_ERROR(LengthError);
SMIDIFF_DEFINE_ERROR(FormatError);

// Numerical engine.
SMIDIFF_DEFINE_ERROR(ShapeMismatch);
SMIDIFF_DEFINE_ERROR(NotScalar);
SMIDIFF_DEFINE_ERROR(DetachedGraph);

// Diffusion process.
SMIDIFF_DEFINE_ERROR(InvalidArgument);
SMIDIFF_DEFINE_ERROR(IdOutOfRange);
SMIDIFF_DEFINE_ERROR(StepOutOfRange);

// Metrics.
SMIDIFF_DEFINE_ERROR(SizeMismatch);
SMIDIFF_DEFINE_ERROR(EmptyCorpus);
SMIDIFF_DEFINE_ERROR(LengthMismatch);

// Models and I/O.
SMIDIFF_DEFINE_ERROR(EmptyText);
SMIDIFF_DEFINE_ERROR(ModelNotLoaded);
SMIDIFF_DEFINE_ERROR(FileError);
SMIDIFF_DEFINE_ERROR(HeaderError);
SMIDIFF_DEFINE_ERROR(DataError);

#undef SMIDIFF_DEFINE_ERROR

}  // namespace smidiff

#endif  // SMIDIFF_ERRORS_HPP_
