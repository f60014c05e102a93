#pragma once

#include <stdexcept>
#include <string>

namespace graspalign {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, schemas, preconditions).
struct InvalidInput : Error {
  using Error::Error;
};

/// The pair graph does not connect all images.
struct DisconnectedGraph : Error {
  using Error::Error;
};

/// A solver left the trust region (loss above the divergence guard).
struct Divergence : Error {
  using Error::Error;
};

/// Inverse kinematics failed to converge; carries the best pose residual.
struct IkFailure : Error {
  IkFailure(const std::string& what, double residual)
      : Error(what), best_residual(residual) {}
  double best_residual;
};

}  // namespace graspalign
