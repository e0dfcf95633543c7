#include "dmce/noise_predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "dmce/errors.hpp"

namespace dmce {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (!(decay > 0.0 && decay <= 1.0))
        throw std::invalid_argument("TrainConfig: decay must be in (0, 1]");
    if (epochs < 1 || batch_size < 1 || batches_per_epoch < 1)
        throw std::invalid_argument("TrainConfig: epochs, batch_size, batches_per_epoch must be >= 1");
}

NoisePredictor::NoisePredictor(Mlp core, std::size_t time_embedding_dim, double train_signal_power)
    : core_(std::move(core)), embed_dim_(time_embedding_dim), train_signal_power_(train_signal_power) {
    const std::size_t data = core_.output_dim();
    const std::size_t in = core_.input_dim();
    if (in != data + embed_dim_ && in != 2 * data + embed_dim_)
        throw std::invalid_argument("NoisePredictor: core input dim inconsistent with output dim");
}

std::vector<double> NoisePredictor::predict(const std::vector<double>& x_t, std::size_t t) const {
    if (conditioned())
        throw std::invalid_argument("NoisePredictor: conditioning vector required");
    if (x_t.size() != data_dim())
        throw std::invalid_argument("NoisePredictor: sample length mismatch");
    std::vector<double> input;
    input.reserve(core_.input_dim());
    input.insert(input.end(), x_t.begin(), x_t.end());
    const std::vector<double> emb = sinusoidal_time_embedding(t, embed_dim_);
    input.insert(input.end(), emb.begin(), emb.end());
    return core_.forward(input);
}

std::vector<double> NoisePredictor::predict(const std::vector<double>& x_t, std::size_t t,
                                            const std::vector<double>& condition) const {
    if (!conditioned()) return predict(x_t, t);
    if (x_t.size() != data_dim() || condition.size() != data_dim())
        throw std::invalid_argument("NoisePredictor: sample or condition length mismatch");
    std::vector<double> input;
    input.reserve(core_.input_dim());
    input.insert(input.end(), x_t.begin(), x_t.end());
    input.insert(input.end(), condition.begin(), condition.end());
    const std::vector<double> emb = sinusoidal_time_embedding(t, embed_dim_);
    input.insert(input.end(), emb.begin(), emb.end());
    return core_.forward(input);
}

PredictorTrainResult train_noise_predictor(const ChannelSampler& sampler, std::size_t rows,
                                           std::size_t cols, const NoiseSchedule& schedule,
                                           const TrainConfig& cfg, const PredictorArch& arch) {
    cfg.validate();
    const std::size_t data_dim = 2 * rows * cols;

    Rng rng(cfg.rng_seed);
    std::vector<std::size_t> dims;
    dims.push_back(data_dim + (arch.condition_on_estimate ? data_dim : 0) +
                   arch.time_embedding_dim);
    for (std::size_t k = 0; k < arch.hidden_layers; ++k) dims.push_back(arch.hidden_width);
    dims.push_back(data_dim);
    Mlp net(dims, rng);

    MlpGradients grads = net.make_gradients();
    MlpCache cache;
    std::vector<double> input(net.input_dim());
    std::vector<double> eps(data_dim);
    std::vector<double> epoch_loss;
    epoch_loss.reserve(cfg.epochs);

    double lr = cfg.learning_rate;
    double power_sum = 0.0;
    std::size_t power_count = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t s = 0; s < cfg.batch_size; ++s) {
                const ComplexMatrix h = sampler(rng);
                if (h.rows() != rows || h.cols() != cols)
                    throw std::invalid_argument("train_noise_predictor: sampler dims mismatch");
                const std::vector<double> x0 = h.to_real_vector();
                power_sum += frobenius_norm_sq(h) / static_cast<double>(rows * cols);
                ++power_count;

                const std::size_t t = 1 + static_cast<std::size_t>(
                                              rng.uniform_index(schedule.steps()));
                for (double& e : eps) e = rng.normal() * M_SQRT1_2;
                const std::vector<double> x_t = q_sample(x0, t, eps, schedule);

                input.clear();
                input.insert(input.end(), x_t.begin(), x_t.end());
                if (arch.condition_on_estimate) {
                    // The conditioning input at inference is the noisy
                    // estimate itself; mimic it with the matched noise level.
                    const double sigma_sq = schedule.noise_to_signal(t);
                    for (std::size_t i = 0; i < data_dim; ++i)
                        input.push_back(x0[i] + rng.normal() * std::sqrt(sigma_sq * 0.5));
                }
                const std::vector<double> emb =
                    sinusoidal_time_embedding(t, arch.time_embedding_dim);
                input.insert(input.end(), emb.begin(), emb.end());

                const std::vector<double>& out = net.forward(input, cache);
                // Mean over elements and batch; gradient of  mean((out-eps)^2).
                std::vector<double> up(data_dim);
                double sample_loss = 0.0;
                const double scale =
                    1.0 / (static_cast<double>(data_dim) * static_cast<double>(cfg.batch_size));
                for (std::size_t i = 0; i < data_dim; ++i) {
                    const double r = out[i] - eps[i];
                    sample_loss += r * r;
                    up[i] = 2.0 * r * scale;
                }
                batch_loss += sample_loss / static_cast<double>(data_dim);
                net.backward(cache, up, grads);
            }
            batch_loss /= static_cast<double>(cfg.batch_size);
            if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch + 1);
            loss_sum += batch_loss;
            sgd_step(net, grads, lr);
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(cfg.batches_per_epoch));
        lr *= cfg.decay;
    }

    const double p_hat = power_count > 0 ? power_sum / static_cast<double>(power_count) : 1.0;
    PredictorTrainResult result{NoisePredictor(std::move(net), arch.time_embedding_dim, p_hat),
                                std::move(epoch_loss)};
    return result;
}

}  // namespace dmce
