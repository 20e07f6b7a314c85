#pragma once

#include <functional>
#include <vector>

namespace mtcae {

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// where numeric is the central finite difference of `loss` at `params`.
// `loss` must be deterministic and pure in its argument.
double finite_difference_gradcheck(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& params,
    const std::vector<double>& analytic_grad, double eps);

}  // namespace mtcae
