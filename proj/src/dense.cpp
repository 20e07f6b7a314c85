#include "mtcae/dense.hpp"

#include <cmath>
#include <string>

#include "mtcae/activations.hpp"

namespace mtcae {

LayerCache dense_forward(const DenseLayer& layer, const Matrix& input) {
    if (input.cols != layer.in_dim()) {
        throw ShapeError("dense_forward: input has " + std::to_string(input.cols) +
                         " columns, layer expects " + std::to_string(layer.in_dim()));
    }
    LayerCache cache;
    cache.input = input;
    cache.pre_activation = matmul_trans_b(input, layer.weights);
    for (std::size_t i = 0; i < cache.pre_activation.rows; ++i) {
        double* row = cache.pre_activation.row_ptr(i);
        for (std::size_t j = 0; j < cache.pre_activation.cols; ++j) {
            row[j] += layer.biases[j];
        }
    }
    switch (layer.activation) {
        case Activation::Linear:
            cache.post_activation = cache.pre_activation;
            break;
        case Activation::Softmax:
            cache.post_activation = softmax_rows(cache.pre_activation);
            break;
        case Activation::Elu: {
            cache.post_activation = cache.pre_activation;
            for (double& v : cache.post_activation.data) {
                if (v < 0.0) v = layer.alpha * std::expm1(v);
            }
            break;
        }
    }
    return cache;
}

DenseGrads dense_backward(const DenseLayer& layer, const LayerCache& cache,
                          const Matrix& upstream, bool need_input_grad) {
    if (upstream.rows != cache.post_activation.rows ||
        upstream.cols != cache.post_activation.cols) {
        throw ShapeError("dense_backward: upstream shape mismatch");
    }

    // Gradient at the pre-activation.
    Matrix delta;
    switch (layer.activation) {
        case Activation::Linear:
        case Activation::Softmax:
            // Softmax upstream arrives fused at the pre-activation.
            delta = upstream;
            break;
        case Activation::Elu: {
            delta = upstream;
            const double alpha = layer.alpha;
            for (std::size_t k = 0; k < delta.data.size(); ++k) {
                double pre = cache.pre_activation.data[k];
                if (pre < 0.0) {
                    // elu'(x) = elu(x) + alpha for x < 0; reuses the forward value.
                    delta.data[k] *= cache.post_activation.data[k] + alpha;
                }
            }
            break;
        }
    }

    DenseGrads grads;
    grads.weight_grad = matmul_trans_a(delta, cache.input);
    grads.bias_grad.assign(layer.out_dim(), 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i) {
        const double* row = delta.row_ptr(i);
        for (std::size_t j = 0; j < delta.cols; ++j) grads.bias_grad[j] += row[j];
    }
    if (need_input_grad) {
        grads.input_grad = matmul(delta, layer.weights);
    }
    return grads;
}

Matrix glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

DenseLayer make_dense(std::size_t out_dim, std::size_t in_dim, Activation act,
                      Rng& rng) {
    DenseLayer layer(out_dim, in_dim, act);
    layer.weights = glorot_init(in_dim, out_dim, rng);
    return layer;
}

}  // namespace mtcae
