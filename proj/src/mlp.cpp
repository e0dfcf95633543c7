#include "dmce/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmce {

void MlpGradients::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, Rng& rng) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
    for (std::size_t d : dims_)
        if (d == 0) throw std::invalid_argument("Mlp: zero layer width");
    weights_.resize(layer_count());
    biases_.resize(layer_count());
    for (std::size_t k = 0; k < layer_count(); ++k) {
        const std::size_t fan_in = dims_[k];
        const std::size_t fan_out = dims_[k + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        weights_[k].resize(fan_out * fan_in);
        for (double& w : weights_[k]) w = rng.uniform(-bound, bound);
        biases_[k].assign(fan_out, 0.0);
    }
}

namespace {

inline double leaky(double z) { return z >= 0.0 ? z : Mlp::kLeakSlope * z; }
inline double leaky_deriv(double z) { return z >= 0.0 ? 1.0 : Mlp::kLeakSlope; }

// Fixed-order four-lane dot product; the independent accumulator chains let
// the compiler vectorize the reduction without reassociating it freely.
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace

std::vector<double> Mlp::forward(const std::vector<double>& input) const {
    if (input.size() != input_dim())
        throw std::invalid_argument("Mlp::forward: input length " + std::to_string(input.size()) +
                                    " != " + std::to_string(input_dim()));
    std::vector<double> cur = input;
    std::vector<double> next;
    for (std::size_t k = 0; k < layer_count(); ++k) {
        const std::size_t out_dim = dims_[k + 1];
        const std::size_t in_dim = dims_[k];
        next.assign(out_dim, 0.0);
        const double* w = weights_[k].data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double acc = biases_[k][o] + dot(w + o * in_dim, cur.data(), in_dim);
            next[o] = (k + 1 < layer_count()) ? leaky(acc) : acc;
        }
        cur.swap(next);
    }
    return cur;
}

const std::vector<double>& Mlp::forward(const std::vector<double>& input, MlpCache& cache) const {
    if (input.size() != input_dim())
        throw std::invalid_argument("Mlp::forward: input length " + std::to_string(input.size()) +
                                    " != " + std::to_string(input_dim()));
    cache.post.assign(layer_count() + 1, {});
    cache.pre.assign(layer_count(), {});
    cache.post[0] = input;
    for (std::size_t k = 0; k < layer_count(); ++k) {
        const std::size_t out_dim = dims_[k + 1];
        const std::size_t in_dim = dims_[k];
        const std::vector<double>& x = cache.post[k];
        std::vector<double>& z = cache.pre[k];
        z.assign(out_dim, 0.0);
        const double* w = weights_[k].data();
        for (std::size_t o = 0; o < out_dim; ++o)
            z[o] = biases_[k][o] + dot(w + o * in_dim, x.data(), in_dim);
        if (k + 1 < layer_count()) {
            std::vector<double>& a = cache.post[k + 1];
            a.resize(out_dim);
            for (std::size_t o = 0; o < out_dim; ++o) a[o] = leaky(z[o]);
        } else {
            cache.post[k + 1] = z;
        }
    }
    cache.valid = true;
    return cache.post.back();
}

std::vector<double> Mlp::backward(const MlpCache& cache, const std::vector<double>& upstream_grad,
                                  MlpGradients& grads) const {
    if (!cache.valid || cache.post.size() != layer_count() + 1)
        throw std::logic_error("Mlp::backward: no forward cache for this network");
    if (upstream_grad.size() != output_dim())
        throw std::invalid_argument("Mlp::backward: upstream gradient length mismatch");

    std::vector<double> delta = upstream_grad;  // gradient wrt layer output
    std::vector<double> prev;
    for (std::size_t k = layer_count(); k-- > 0;) {
        const std::size_t out_dim = dims_[k + 1];
        const std::size_t in_dim = dims_[k];
        // Through the activation (output layer is linear).
        if (k + 1 < layer_count()) {
            for (std::size_t o = 0; o < out_dim; ++o) delta[o] *= leaky_deriv(cache.pre[k][o]);
        }
        const std::vector<double>& x = cache.post[k];
        double* gw = grads.weights[k].data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            grads.biases[k][o] += d;
            double* row = gw + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) row[i] += d * x[i];
        }
        prev.assign(in_dim, 0.0);
        const double* w = weights_[k].data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            const double* row = w + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) prev[i] += d * row[i];
        }
        delta.swap(prev);
    }
    return delta;
}

MlpGradients Mlp::make_gradients() const {
    MlpGradients g;
    g.weights.resize(layer_count());
    g.biases.resize(layer_count());
    for (std::size_t k = 0; k < layer_count(); ++k) {
        g.weights[k].assign(weights_[k].size(), 0.0);
        g.biases[k].assign(biases_[k].size(), 0.0);
    }
    return g;
}

bool Mlp::all_finite() const {
    for (const auto& w : weights_)
        for (double v : w)
            if (!std::isfinite(v)) return false;
    for (const auto& b : biases_)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

void sgd_step(Mlp& net, const MlpGradients& grads, double learning_rate) {
    if (grads.weights.size() != net.layer_count())
        throw std::invalid_argument("sgd_step: gradient layer count mismatch");
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        auto& w = net.weights()[k];
        auto& b = net.biases()[k];
        if (grads.weights[k].size() != w.size() || grads.biases[k].size() != b.size())
            throw std::invalid_argument("sgd_step: gradient shape mismatch at layer " +
                                        std::to_string(k));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * grads.weights[k][i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads.biases[k][i];
    }
}

std::vector<double> sinusoidal_time_embedding(std::size_t t, std::size_t dim) {
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("sinusoidal_time_embedding: dim must be even and >= 2");
    const std::size_t half = dim / 2;
    std::vector<double> emb(dim);
    for (std::size_t k = 0; k < half; ++k) {
        const double expo = half > 1 ? static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
        const double wavelength = std::pow(10000.0, expo);
        const double arg = static_cast<double>(t) / wavelength;
        emb[2 * k] = std::sin(arg);
        emb[2 * k + 1] = std::cos(arg);
    }
    return emb;
}

std::vector<double> sinusoidal_time_embedding(std::size_t t, std::size_t dim, std::size_t t_max) {
    if (t < 1 || t > t_max)
        throw std::invalid_argument("sinusoidal_time_embedding: step " + std::to_string(t) +
                                    " outside [1, " + std::to_string(t_max) + "]");
    return sinusoidal_time_embedding(t, dim);
}

}  // namespace dmce
