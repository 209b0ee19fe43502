#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ftlwave {

// Base class for every recoverable error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An argument lies outside its mathematical domain (density out of [0,1], ...).
struct DomainError : Error {
  using Error::Error;
};

// A bracketing search found no sign change.
struct NoRootError : Error {
  using Error::Error;
};

// Rankine-Hugoniot mismatch between the two sides of the speed-limit jump.
struct RhViolation : Error {
  RhViolation(double flux_minus_, double flux_plus_)
      : Error("Rankine-Hugoniot violation: f-(rho-) = " + std::to_string(flux_minus_) +
              " vs f+(rho+) = " + std::to_string(flux_plus_)),
        flux_minus(flux_minus_),
        flux_plus(flux_plus_) {}
  double flux_minus;
  double flux_plus;
};

// The flux level sits at the maximum of the smaller flux, so the inner roots collapse.
struct DegenerateCaseError : Error {
  using Error::Error;
};

// Backward march could not leave the seeded state within the allotted span.
struct SeedFailure : Error {
  using Error::Error;
};

// Requested value falls outside an interpolable range.
struct OutOfRangeError : Error {
  using Error::Error;
};

// A delayed-value read would touch a region that has not been computed yet.
struct StepRejected : Error {
  using Error::Error;
};

// Interval arguments leave the sampled span of a profile.
struct SpanError : Error {
  using Error::Error;
};

struct SpanTooShort : Error {
  using Error::Error;
};

// Position recursion walked off the sampled span.
struct RangeExhausted : Error {
  using Error::Error;
};

// Car gap dropped below the car length.
struct SpacingViolation : Error {
  SpacingViolation(std::size_t index_, double gap_, double ell_)
      : Error("spacing violation at car " + std::to_string(index_) + ": gap " +
              std::to_string(gap_) + " < ell " + std::to_string(ell_)),
        index(index_),
        gap(gap_) {}
  std::size_t index;
  double gap;
};

// Requested time offset is not resolvable on the recorded snapshot grid.
struct AlignmentError : Error {
  using Error::Error;
};

// Point lies outside the band spanned by a profile family.
struct OutsideD : Error {
  using Error::Error;
};

// A solver failed an internal consistency requirement.
struct SolveError : Error {
  using Error::Error;
};

}  // namespace ftlwave
