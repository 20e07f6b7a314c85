#pragma once

#include <vector>

#include "mtcae/matrix.hpp"
#include "mtcae/rng.hpp"

namespace mtcae {

enum class Activation { Linear, Elu, Softmax };

// Fully connected layer: pre = x * W^T + b, W is [out x in].
struct DenseLayer {
    Matrix weights;
    std::vector<double> biases;
    Activation activation = Activation::Linear;
    double alpha = 1.0;  // ELU shape parameter

    DenseLayer() = default;
    DenseLayer(std::size_t out_dim, std::size_t in_dim, Activation act)
        : weights(out_dim, in_dim), biases(out_dim, 0.0), activation(act) {}

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
    std::size_t param_count() const { return weights.size() + biases.size(); }
};

struct LayerCache {
    Matrix input;           // [batch x in]
    Matrix pre_activation;  // [batch x out]
    Matrix post_activation; // [batch x out]
};

struct DenseGrads {
    Matrix weight_grad;             // [out x in]
    std::vector<double> bias_grad;  // [out]
    Matrix input_grad;              // [batch x in], empty if not requested
};

// Affine transform plus elementwise activation (softmax per row).
LayerCache dense_forward(const DenseLayer& layer, const Matrix& input);

// Gradients of the batch loss w.r.t. weights, biases and inputs. For softmax
// layers `upstream` must already be the gradient at the pre-activation (the
// fused softmax/cross-entropy form); for other activations it is the gradient
// at the post-activation. Pass need_input_grad=false at the lowest layer to
// skip the input gradient.
DenseGrads dense_backward(const DenseLayer& layer, const LayerCache& cache,
                          const Matrix& upstream, bool need_input_grad = true);

// Glorot-uniform weights: entries uniform in +/- sqrt(6 / (fan_in + fan_out)).
Matrix glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Layer with Glorot weights and zero biases.
DenseLayer make_dense(std::size_t out_dim, std::size_t in_dim, Activation act,
                      Rng& rng);

}  // namespace mtcae
