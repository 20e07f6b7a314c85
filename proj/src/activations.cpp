#include "mtcae/activations.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtcae {

double elu(double x, double alpha) {
    return x >= 0.0 ? x : alpha * std::expm1(x);
}

double elu_derivative(double x, double alpha) {
    return x >= 0.0 ? 1.0 : alpha * std::exp(x);
}

namespace {

void softmax_row(const double* logits, double* out, std::size_t n) {
    double mx = logits[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = std::exp(logits[j] - mx);
        sum += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    if (!logits.empty()) softmax_row(logits.data(), out.data(), logits.size());
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        softmax_row(logits.row_ptr(i), out.row_ptr(i), logits.cols);
    }
    return out;
}

double cross_entropy(const std::vector<double>& true_onehot,
                     const std::vector<double>& q) {
    if (true_onehot.size() != q.size()) {
        throw ShapeError("cross_entropy: distribution sizes differ");
    }
    double loss = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (true_onehot[j] != 0.0) {
            loss -= true_onehot[j] * std::log(std::max(q[j], kProbFloor));
        }
    }
    return loss;
}

double cross_entropy_mean(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size()) {
        throw ShapeError("cross_entropy_mean: batch size mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        total -= std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])),
                                   kProbFloor));
    }
    return probs.rows == 0 ? 0.0 : total / static_cast<double>(probs.rows);
}

std::vector<double> softmax_cross_entropy_grad(const std::vector<double>& probs,
                                               std::size_t label) {
    if (label >= probs.size()) {
        throw std::out_of_range("softmax_cross_entropy_grad: label out of range");
    }
    std::vector<double> g = probs;
    g[label] -= 1.0;
    return g;
}

double l2_penalty(const std::vector<const Matrix*>& weights, double beta) {
    double s = 0.0;
    for (const Matrix* w : weights) s += squared_norm(*w);
    return beta * s;
}

}  // namespace mtcae
