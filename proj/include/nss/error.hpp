#pragma once

#include <stdexcept>
#include <string>

namespace nss {

// Precondition violations throw std::invalid_argument. Failures of a numerical
// procedure on valid input (quadrature that does not converge, non-finite
// estimator values) throw numerical_error.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace nss
