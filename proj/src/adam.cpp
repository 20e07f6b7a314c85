#include "mtcae/adam.hpp"

#include <cmath>
#include <string>

#include "mtcae/errors.hpp"

namespace mtcae {

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grads, double lr,
               std::string_view block_name) {
    if (params.size() != grads.size() ||
        params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw ShapeError("adam_step: size mismatch for block '" +
                         std::string(block_name) + "'");
    }
    if (lr <= 0.0) {
        throw NumericError("adam_step: learning rate must be positive");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) {
            throw NumericError("adam_step: non-finite gradient in block '" +
                               std::string(block_name) + "'");
        }
    }

    state.step_count += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    const double eps = state.epsilon;

    double* m = state.first_moment.data();
    double* v = state.second_moment.data();
    double* p = params.data();
    const double* g = grads.data();
    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

}  // namespace mtcae
