#pragma once

#include <stdexcept>
#include <string>

namespace monstereo {

// Malformed input files or inconsistent datasets. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failures: divergence, failed checks, math domain violations
// surface as std::domain_error. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace monstereo
