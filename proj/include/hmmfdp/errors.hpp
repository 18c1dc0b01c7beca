#ifndef HMMFDP_ERRORS_HPP
#define HMMFDP_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmmfdp {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Model or configuration parameters violate an invariant
// (rank-deficient transition matrix, identical emission densities, ...).
class InvalidParameterError : public Error {
public:
  using Error::Error;
};

// Malformed input data (CSV parse failures, schema violations, ...).
class DataError : public Error {
public:
  using Error::Error;
};

// Both emission densities vanish at an observation; the likelihood is zero
// and the posterior is undefined.  Carries the offending 0-based index.
class DegenerateLikelihoodError : public Error {
public:
  DegenerateLikelihoodError(std::size_t index, const std::string& what)
      : Error(what), index(index) {}
  std::size_t index;
};

// Estimation failed (degenerate initialization, all-zero KDE weights,
// too many bootstrap refit failures, ...).
class EstimationError : public Error {
public:
  using Error::Error;
};

// A nonempty selection was required.
class EmptySelectionError : public Error {
public:
  using Error::Error;
};

}  // namespace hmmfdp

#endif
