#pragma once

#include <stdexcept>
#include <string>

namespace lightgrad {

// Tensor/mel shape disagreements. Distinct from std::invalid_argument so
// callers can tell a wiring bug from a bad parameter value.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed files (mel files, checkpoints, transcripts, configs).
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw shape_error(msg);
}

inline void require_domain(bool cond, const std::string& msg) {
    if (!cond) throw std::domain_error(msg);
}

}  // namespace lightgrad
