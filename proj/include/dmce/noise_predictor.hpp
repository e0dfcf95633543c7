#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dmce/complex_matrix.hpp"
#include "dmce/diffusion.hpp"
#include "dmce/mlp.hpp"
#include "dmce/rng.hpp"

namespace dmce {

/// SGD settings shared by all training stages.
struct TrainConfig {
    double learning_rate = 0.01;
    double decay = 0.95;          // multiplicative per-epoch learning-rate factor
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::size_t batches_per_epoch = 50;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

/// Architecture of the noise predictor network.
struct PredictorArch {
    std::size_t hidden_width = 128;
    std::size_t hidden_layers = 3;
    std::size_t time_embedding_dim = 32;
    bool condition_on_estimate = false;
};

/// Time-conditioned noise prediction network eps_theta(x_t, t). Operates on
/// the flat real layout of a complex matrix (length 2*M*N). Input layout:
/// [x_t | conditioning vector if enabled | time embedding].
class NoisePredictor {
public:
    NoisePredictor() = default;
    NoisePredictor(Mlp core, std::size_t time_embedding_dim, double train_signal_power);

    std::size_t data_dim() const { return core_.output_dim(); }
    std::size_t time_embedding_dim() const { return embed_dim_; }
    bool conditioned() const {
        return core_.input_dim() == 2 * data_dim() + embed_dim_;
    }
    /// Per-complex-entry signal power of the training distribution (p-hat).
    double train_signal_power() const { return train_signal_power_; }
    const Mlp& core() const { return core_; }

    std::vector<double> predict(const std::vector<double>& x_t, std::size_t t) const;
    std::vector<double> predict(const std::vector<double>& x_t, std::size_t t,
                                const std::vector<double>& condition) const;

    bool operator==(const NoisePredictor& other) const = default;

private:
    Mlp core_;
    std::size_t embed_dim_ = 32;
    double train_signal_power_ = 1.0;
};

/// Source of training matrices for the diffusion stage.
using ChannelSampler = std::function<ComplexMatrix(Rng&)>;

struct PredictorTrainResult {
    NoisePredictor predictor;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Denoising training: draw a matrix, a uniform step t and a noise vector,
/// form the forward sample and take SGD steps on the mean squared error
/// between true and predicted noise. The noise is drawn as a standard
/// complex Gaussian per matrix entry in the flat real layout. Throws
/// TrainingDivergedError if a batch loss becomes non-finite.
PredictorTrainResult train_noise_predictor(const ChannelSampler& sampler, std::size_t rows,
                                           std::size_t cols, const NoiseSchedule& schedule,
                                           const TrainConfig& cfg, const PredictorArch& arch);

}  // namespace dmce
