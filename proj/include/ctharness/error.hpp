#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ctharness {

// Base of every failure the harness reports. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CTHARNESS_ERROR(Name)          \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

CTHARNESS_ERROR(IoError);
CTHARNESS_ERROR(IngestError);
CTHARNESS_ERROR(DuplicateIdError);
CTHARNESS_ERROR(ValidationError);
CTHARNESS_ERROR(StratificationError);
CTHARNESS_ERROR(UndefinedScoreError);
CTHARNESS_ERROR(RenderError);
CTHARNESS_ERROR(StratumExhaustedError);
CTHARNESS_ERROR(TransportError);
CTHARNESS_ERROR(AuthError);
CTHARNESS_ERROR(UnsupportedCapabilityError);
CTHARNESS_ERROR(ImportError);
CTHARNESS_ERROR(RangeError);
CTHARNESS_ERROR(AlignmentError);
CTHARNESS_ERROR(CalibrationError);
CTHARNESS_ERROR(AggregationError);
CTHARNESS_ERROR(ConfigError);

#undef CTHARNESS_ERROR

// Raised by replay when prompts have no recorded output; carries every missing digest.
class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::vector<std::string> digests);
  const std::vector<std::string>& digests() const noexcept { return digests_; }

 private:
  std::vector<std::string> digests_;
};

}  // namespace ctharness
