#pragma once

#include <stdexcept>
#include <string>

namespace inkless {

// Base for every domain error raised by the library. The CLI maps these to
// exit code 1; anything else escaping a subcommand is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define INKLESS_DEFINE_ERROR(Name)         \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

INKLESS_DEFINE_ERROR(IoError);
INKLESS_DEFINE_ERROR(FormatError);
INKLESS_DEFINE_ERROR(BoundsError);
INKLESS_DEFINE_ERROR(GeometryError);
INKLESS_DEFINE_ERROR(AlignmentError);
INKLESS_DEFINE_ERROR(ConfigError);
INKLESS_DEFINE_ERROR(SpecError);
INKLESS_DEFINE_ERROR(InputError);
INKLESS_DEFINE_ERROR(DataError);
INKLESS_DEFINE_ERROR(LookupError);
INKLESS_DEFINE_ERROR(ShapeError);
INKLESS_DEFINE_ERROR(CheckpointError);
INKLESS_DEFINE_ERROR(TrainingDiverged);
INKLESS_DEFINE_ERROR(ReportError);
INKLESS_DEFINE_ERROR(UndefinedCorrelation);
INKLESS_DEFINE_ERROR(NotFound);
INKLESS_DEFINE_ERROR(Conflict);
INKLESS_DEFINE_ERROR(IncompleteSession);

#undef INKLESS_DEFINE_ERROR

// Raised when rejection sampling cannot fill a label quota.
class SamplingExhausted : public Error {
 public:
  SamplingExhausted(std::string label, const std::string& what)
      : Error(what), label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

}  // namespace inkless
