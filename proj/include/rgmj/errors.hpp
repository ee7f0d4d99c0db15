#pragma once

#include <stdexcept>
#include <string>

namespace rgmj {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Marginal-likelihood computation failed (e.g. IRLS did not converge).
struct EvidenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnumerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rgmj
