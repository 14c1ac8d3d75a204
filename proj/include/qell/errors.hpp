#pragma once

#include <stdexcept>

namespace qell {

struct DegenerateSweepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllConditionedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qell
