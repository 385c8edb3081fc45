#pragma once

#include <stdexcept>
#include <string>

namespace acdf {

// Every error raised by the library carries a stable machine-readable kind;
// the CLI forwards it verbatim in its JSON error envelope.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define ACDF_DEFINE_ERROR(Name, kind_string)                          \
  class Name : public Error {                                         \
  public:                                                             \
    explicit Name(const std::string& message) : Error(kind_string, message) {} \
  };

ACDF_DEFINE_ERROR(InvalidArgumentError, "invalid_argument")
ACDF_DEFINE_ERROR(OutOfDomainError, "out_of_domain")
ACDF_DEFINE_ERROR(AlignmentError, "alignment")
ACDF_DEFINE_ERROR(CoverageError, "coverage")
ACDF_DEFINE_ERROR(ShapeError, "shape_mismatch")
ACDF_DEFINE_ERROR(ExtrapolationError, "extrapolation")
ACDF_DEFINE_ERROR(NotTrainedError, "not_trained")
ACDF_DEFINE_ERROR(FrozenModelError, "frozen_model")
ACDF_DEFINE_ERROR(ContractError, "contract_violation")
ACDF_DEFINE_ERROR(IncompleteCycleError, "incomplete_cycle")
ACDF_DEFINE_ERROR(RangeError, "out_of_range")
ACDF_DEFINE_ERROR(EmptySetError, "empty_set")
ACDF_DEFINE_ERROR(ConfigError, "config")
ACDF_DEFINE_ERROR(IoError, "io")
ACDF_DEFINE_ERROR(FormatError, "format")

#undef ACDF_DEFINE_ERROR

}  // namespace acdf
