#include "mtcae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mtcae/errors.hpp"

namespace mtcae {

double finite_difference_gradcheck(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& params,
    const std::vector<double>& analytic_grad, double eps) {
    if (params.size() != analytic_grad.size()) {
        throw ShapeError("finite_difference_gradcheck: gradient size mismatch");
    }
    if (!(eps > 0.0)) {
        throw NumericError("finite_difference_gradcheck: eps must be positive");
    }
    std::vector<double> perturbed = params;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        perturbed[i] = params[i] + eps;
        double up = loss(perturbed);
        perturbed[i] = params[i] - eps;
        double down = loss(perturbed);
        perturbed[i] = params[i];
        double numeric = (up - down) / (2.0 * eps);
        double analytic = analytic_grad[i];
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace mtcae
