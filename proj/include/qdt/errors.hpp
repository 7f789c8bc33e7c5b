#pragma once

#include <stdexcept>
#include <string>

namespace qdt {

// Bad run setup: inconsistent dimensions, invalid hyperparameters, missing files.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: non-finite loss, singular system, NaN input.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qdt
