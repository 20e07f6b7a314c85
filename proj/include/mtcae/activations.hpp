#pragma once

#include <cstddef>
#include <vector>

#include "mtcae/matrix.hpp"

namespace mtcae {

// Exponential linear unit: x for x >= 0, alpha*(e^x - 1) otherwise.
double elu(double x, double alpha = 1.0);

// Right-derivative convention at 0 (returns 1 there).
double elu_derivative(double x, double alpha = 1.0);

// Numerically stable softmax of one logit row.
std::vector<double> softmax(const std::vector<double>& logits);

// Softmax applied independently to every row of a logit matrix.
Matrix softmax_rows(const Matrix& logits);

// -log q[true class], with q floored at 1e-12. true_onehot must be one-hot.
double cross_entropy(const std::vector<double>& true_onehot,
                     const std::vector<double>& q);

// Batch-mean cross-entropy from probability rows and integer labels.
double cross_entropy_mean(const Matrix& probs, const std::vector<int>& labels);

// Gradient of cross_entropy(softmax(z)) w.r.t. the logits z: probs - onehot.
std::vector<double> softmax_cross_entropy_grad(const std::vector<double>& probs,
                                               std::size_t label);

// beta * sum of squared entries over all given weight matrices.
double l2_penalty(const std::vector<const Matrix*>& weights, double beta);

constexpr double kProbFloor = 1e-12;

}  // namespace mtcae
