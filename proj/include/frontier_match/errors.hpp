#pragma once

#include <stdexcept>
#include <string>

namespace frontier_match {

// Violations of input contracts: malformed CSV, bad configuration, missing
// outcomes. The CLI maps these to exit code 2.
class validation_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Failures of the numeric machinery: perfect separation, singular information
// matrix, infeasible envelopment program. The CLI maps these to exit code 3.
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace frontier_match
