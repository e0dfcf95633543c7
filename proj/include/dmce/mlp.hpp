#pragma once

#include <cstddef>
#include <vector>

#include "dmce/rng.hpp"

namespace dmce {

/// Per-layer parameter gradients, same shapes as the network parameters.
struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void zero();
};

/// Activations recorded by a forward pass, consumed by backward.
struct MlpCache {
    std::vector<std::vector<double>> post;  // post[0] is the input
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    bool valid = false;
};

/// Fully connected network: affine layers with leaky-rectifier (slope 0.01)
/// hidden activations and a linear output layer. Weights are row-major
/// (out_dim x in_dim), double precision.
class Mlp {
public:
    static constexpr double kLeakSlope = 0.01;

    Mlp() = default;

    /// Glorot-uniform initialization: weights uniform in
    /// +-sqrt(6 / (fan_in + fan_out)), biases zero.
    Mlp(std::vector<std::size_t> layer_dims, Rng& rng);

    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t layer_count() const { return dims_.size() - 1; }

    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    std::vector<double> forward(const std::vector<double>& input) const;
    const std::vector<double>& forward(const std::vector<double>& input, MlpCache& cache) const;

    /// Reverse-mode gradients of the cached forward pass. Parameter
    /// gradients are accumulated into grads (caller zeroes); returns the
    /// gradient with respect to the input. Throws std::logic_error if the
    /// cache does not hold a forward pass.
    std::vector<double> backward(const MlpCache& cache, const std::vector<double>& upstream_grad,
                                 MlpGradients& grads) const;

    MlpGradients make_gradients() const;
    bool all_finite() const;

    bool operator==(const Mlp& other) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

/// theta <- theta - lr * grad for every parameter.
void sgd_step(Mlp& net, const MlpGradients& grads, double learning_rate);

/// Interleaved sin/cos embedding of a step index at dim/2 geometric
/// wavelengths spanning [1, 10000]. dim must be even.
std::vector<double> sinusoidal_time_embedding(std::size_t t, std::size_t dim);

/// Range-checked variant: requires 1 <= t <= t_max.
std::vector<double> sinusoidal_time_embedding(std::size_t t, std::size_t dim, std::size_t t_max);

}  // namespace dmce
