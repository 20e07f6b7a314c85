#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mtcae {

// Per-parameter-block Adam moment estimates.
struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t n = 0)
        : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// One bias-corrected Adam update, in place. Throws NumericError naming
// `block_name` if any gradient entry is non-finite; the state and parameters
// are left untouched in that case.
void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grads, double lr,
               std::string_view block_name = "params");

}  // namespace mtcae
