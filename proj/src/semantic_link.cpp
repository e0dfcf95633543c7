#include "dmce/semantic_link.hpp"

#include <cmath>
#include <stdexcept>

#include "dmce/errors.hpp"
#include "dmce/metrics.hpp"

namespace dmce {

namespace {
constexpr double kProbClamp = 1e-12;
}

SegmentationMap ProbabilityMap::argmax() const {
    SegmentationMap map;
    map.height = height;
    map.width = width;
    map.classes = classes;
    map.labels.resize(cells());
    for (std::size_t c = 0; c < cells(); ++c) {
        const double* p = probs.data() + c * classes;
        std::size_t best = 0;
        for (std::size_t g = 1; g < classes; ++g)
            if (p[g] > p[best]) best = g;
        map.labels[c] = static_cast<int>(best);
    }
    return map;
}

void CodecConfig::validate() const {
    scene.validate();
    if (feature_length < 1 || symbols < 1)
        throw std::invalid_argument("CodecConfig: feature_length and symbols must be >= 1");
    if (!(power > 0.0)) throw std::invalid_argument("CodecConfig: power must be positive");
    if (encoder_hidden < 1 || decoder_hidden < 1)
        throw std::invalid_argument("CodecConfig: hidden widths must be >= 1");
}

SemanticCodecs SemanticCodecs::initialize(const CodecConfig& cfg, Rng& rng) {
    cfg.validate();
    SemanticCodecs c;
    c.cfg = cfg;
    const std::size_t n = cfg.scene.users;
    for (std::size_t u = 0; u < n; ++u) {
        c.semantic_encoders.emplace_back(
            std::vector<std::size_t>{cfg.pixels(), cfg.encoder_hidden, cfg.feature_length}, rng);
        c.jscc_encoders.emplace_back(
            std::vector<std::size_t>{cfg.feature_length, cfg.encoder_hidden, 2 * cfg.symbols},
            rng);
    }
    c.jscc_decoder = Mlp({n * 2 * cfg.symbols, cfg.decoder_hidden, n * cfg.feature_length}, rng);
    c.semantic_decoder =
        Mlp({n * cfg.feature_length, cfg.decoder_hidden, cfg.decoder_hidden, cfg.logits()}, rng);
    return c;
}

std::vector<double> semantic_encode(const Mlp& encoder, const std::vector<double>& image) {
    return encoder.forward(image);
}

namespace {

SymbolBlock normalize_symbols(const std::vector<double>& raw, double power,
                              std::size_t symbol_count) {
    if (raw.size() != 2 * symbol_count)
        throw std::invalid_argument("jscc_encode: encoder output length != 2K");
    double norm_sq = 0.0;
    for (double v : raw) norm_sq += v * v;
    if (!(norm_sq > 0.0))
        throw std::invalid_argument("jscc_encode: zero-norm symbols, scaling undefined");
    const double scale = std::sqrt(power * static_cast<double>(symbol_count) / norm_sq);
    SymbolBlock block;
    block.power = power;
    block.symbols.resize(symbol_count);
    for (std::size_t k = 0; k < symbol_count; ++k)
        block.symbols[k] = cplx{scale * raw[k], scale * raw[symbol_count + k]};
    return block;
}

}  // namespace

SymbolBlock jscc_encode(const Mlp& encoder, const std::vector<double>& features, double power,
                        std::size_t symbol_count) {
    return normalize_symbols(encoder.forward(features), power, symbol_count);
}

std::vector<double> jscc_decode(const Mlp& decoder, const std::vector<double>& stacked_symbols) {
    return decoder.forward(stacked_symbols);
}

namespace {

ProbabilityMap softmax_map(const std::vector<double>& logits, std::size_t height,
                           std::size_t width, std::size_t classes) {
    ProbabilityMap map;
    map.height = height;
    map.width = width;
    map.classes = classes;
    map.probs.resize(logits.size());
    for (std::size_t c = 0; c < map.cells(); ++c) {
        const double* z = logits.data() + c * classes;
        double* p = map.probs.data() + c * classes;
        double zmax = z[0];
        for (std::size_t g = 1; g < classes; ++g) zmax = std::max(zmax, z[g]);
        double sum = 0.0;
        for (std::size_t g = 0; g < classes; ++g) {
            p[g] = std::exp(z[g] - zmax);
            sum += p[g];
        }
        for (std::size_t g = 0; g < classes; ++g) p[g] /= sum;
    }
    return map;
}

}  // namespace

ProbabilityMap semantic_decode(const Mlp& decoder, const std::vector<double>& features,
                               std::size_t height, std::size_t width, std::size_t classes) {
    const std::vector<double> logits = decoder.forward(features);
    if (logits.size() != height * width * classes)
        throw std::invalid_argument("semantic_decode: decoder output != cells * classes");
    return softmax_map(logits, height, width, classes);
}

double cross_entropy(const ProbabilityMap& pred, const SegmentationMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width ||
        pred.classes != truth.classes)
        throw std::invalid_argument("cross_entropy: shape mismatch");
    double loss = 0.0;
    for (std::size_t c = 0; c < pred.cells(); ++c) {
        const double* p = pred.probs.data() + c * pred.classes;
        const int t = truth.labels[c];
        for (std::size_t g = 0; g < pred.classes; ++g) {
            const double pg = std::min(1.0 - kProbClamp, std::max(kProbClamp, p[g]));
            loss -= (static_cast<int>(g) == t) ? std::log(pg) : std::log(1.0 - pg);
        }
    }
    return loss / static_cast<double>(pred.cells());
}

std::vector<double> cross_entropy_logit_grad(const ProbabilityMap& pred,
                                             const SegmentationMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width ||
        pred.classes != truth.classes)
        throw std::invalid_argument("cross_entropy_logit_grad: shape mismatch");
    const std::size_t g_count = pred.classes;
    const double cell_scale = 1.0 / static_cast<double>(pred.cells());
    std::vector<double> grad(pred.probs.size());
    std::vector<double> dp(g_count);
    for (std::size_t c = 0; c < pred.cells(); ++c) {
        const double* p = pred.probs.data() + c * g_count;
        const int t = truth.labels[c];
        double dot = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) {
            // Flat inside the clamp region.
            if (p[g] <= kProbClamp || p[g] >= 1.0 - kProbClamp) {
                dp[g] = 0.0;
            } else if (static_cast<int>(g) == t) {
                dp[g] = -cell_scale / p[g];
            } else {
                dp[g] = cell_scale / (1.0 - p[g]);
            }
            dot += dp[g] * p[g];
        }
        double* out = grad.data() + c * g_count;
        for (std::size_t g = 0; g < g_count; ++g) out[g] = p[g] * (dp[g] - dot);
    }
    return grad;
}

const char* to_string(LinkMode mode) {
    switch (mode) {
        case LinkMode::kDmce: return "dmce";
        case LinkMode::kNoDmce: return "no_dmce";
        case LinkMode::kPerfectCsi: return "perfect_csi";
        case LinkMode::kYOriented: return "y_oriented";
    }
    return "?";
}

namespace {

/// Encode every user's modality into the stacked transmit matrix X (N x K).
ComplexMatrix encode_scene(const SemanticCodecs& codecs, const Scene& scene) {
    const CodecConfig& cfg = codecs.cfg;
    ComplexMatrix x(cfg.scene.users, cfg.symbols);
    for (std::size_t u = 0; u < cfg.scene.users; ++u) {
        const std::vector<double> f = semantic_encode(codecs.semantic_encoders[u],
                                                      scene.modalities[u]);
        const SymbolBlock block = jscc_encode(codecs.jscc_encoders[u], f, cfg.power, cfg.symbols);
        for (std::size_t k = 0; k < cfg.symbols; ++k) x(u, k) = block.symbols[k];
    }
    return x;
}

/// Stacked real layout of the equalized rows: per user, real parts of its
/// K symbols then imaginary parts.
std::vector<double> stack_equalized(const ComplexMatrix& x_hat) {
    std::vector<double> stacked;
    stacked.reserve(2 * x_hat.size());
    for (std::size_t u = 0; u < x_hat.rows(); ++u) {
        for (std::size_t k = 0; k < x_hat.cols(); ++k) stacked.push_back(x_hat(u, k).real());
        for (std::size_t k = 0; k < x_hat.cols(); ++k) stacked.push_back(x_hat(u, k).imag());
    }
    return stacked;
}

}  // namespace

LinkDiagnostics run_link(const LinkConfig& link, const SemanticCodecs& codecs, LinkMode mode,
                         const NoisePredictor* csi_enhancer, const NoisePredictor* y_enhancer,
                         const NoiseSchedule* schedule, Rng& rng) {
    link.validate();
    const CodecConfig& cfg = codecs.cfg;
    if (cfg.scene.users != link.users)
        throw std::invalid_argument("run_link: codec user count != link user count");
    if ((mode == LinkMode::kDmce && (csi_enhancer == nullptr || schedule == nullptr)) ||
        (mode == LinkMode::kYOriented && (y_enhancer == nullptr || schedule == nullptr)))
        throw std::invalid_argument("run_link: mode requires a trained enhancer and schedule");

    const Scene scene = generate_scene(cfg.scene, rng);
    const ComplexMatrix x = encode_scene(codecs, scene);
    const ChannelRealization channel = build_channel(link, rng);
    const ComplexMatrix y = transmit(channel.h, x, link.data_noise_variance, rng);
    const CsiEstimate est = estimate_csi(channel, link.pilot_noise_variance, rng);

    ComplexMatrix csi_used = est.h_hat;
    const ComplexMatrix* received = &y;
    ComplexMatrix y_denoised;
    switch (mode) {
        case LinkMode::kPerfectCsi:
            csi_used = channel.h;
            break;
        case LinkMode::kNoDmce:
            break;
        case LinkMode::kDmce:
            csi_used = enhance_csi(*csi_enhancer, est, *schedule, rng);
            break;
        case LinkMode::kYOriented:
            y_denoised = denoise_matrix(*y_enhancer, y, link.data_noise_variance, *schedule, rng);
            received = &y_denoised;
            break;
    }

    const ComplexMatrix x_hat = solve_least_squares(csi_used, *received);

    const std::vector<double> fused = jscc_decode(codecs.jscc_decoder, stack_equalized(x_hat));
    const ProbabilityMap probs = semantic_decode(codecs.semantic_decoder, fused, cfg.scene.grid,
                                                 cfg.scene.grid, cfg.scene.classes);

    LinkDiagnostics diag;
    diag.predicted = probs.argmax();
    diag.miou_value = miou(diag.predicted, scene.truth);
    diag.nmse_initial_db = nmse_db(est.h_hat, channel.h);
    diag.nmse_equalizer_db =
        mode == LinkMode::kPerfectCsi ? kNmseFloorDb : nmse_db(csi_used, channel.h);
    diag.csi_error_initial = frobenius_norm_sq(est.h_hat - channel.h);
    diag.csi_error_used =
        mode == LinkMode::kPerfectCsi ? 0.0 : frobenius_norm_sq(csi_used - channel.h);
    diag.csi_truth_energy = frobenius_norm_sq(channel.h);
    diag.symbol_mse = frobenius_norm_sq(x_hat - x) / static_cast<double>(x.size());
    return diag;
}

namespace {

struct EncoderCaches {
    MlpCache semantic;
    MlpCache jscc;
    std::vector<double> raw;      // pre-normalization encoder output
    double norm = 0.0;
    double scale = 0.0;           // sqrt(PK)/norm
};

/// Forward one user's encoders keeping caches; returns the normalized
/// symbol vector in real layout.
std::vector<double> forward_encoders(const SemanticCodecs& codecs, std::size_t user,
                                     const std::vector<double>& image, EncoderCaches& caches) {
    const CodecConfig& cfg = codecs.cfg;
    const std::vector<double>& f =
        codecs.semantic_encoders[user].forward(image, caches.semantic);
    caches.raw = codecs.jscc_encoders[user].forward(f, caches.jscc);
    double norm_sq = 0.0;
    for (double v : caches.raw) norm_sq += v * v;
    if (!(norm_sq > 0.0))
        throw std::invalid_argument("train_stage1: zero-norm symbols, scaling undefined");
    caches.norm = std::sqrt(norm_sq);
    caches.scale = std::sqrt(cfg.power * static_cast<double>(cfg.symbols)) / caches.norm;
    std::vector<double> x(caches.raw.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = caches.scale * caches.raw[i];
    return x;
}

/// Backward through x = sqrt(PK) * u / ||u||:
/// du = scale * (dx - uhat (uhat . dx)).
std::vector<double> normalization_backward(const EncoderCaches& caches,
                                           const std::vector<double>& dx) {
    const std::size_t n = dx.size();
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += dx[i] * caches.raw[i];
    dot /= caches.norm * caches.norm;
    std::vector<double> du(n);
    for (std::size_t i = 0; i < n; ++i) du[i] = caches.scale * (dx[i] - dot * caches.raw[i]);
    return du;
}

}  // namespace

StageResult train_stage1(const CodecConfig& cfg, const TrainConfig& tc) {
    cfg.validate();
    tc.validate();
    Rng rng(tc.rng_seed);
    SemanticCodecs codecs = SemanticCodecs::initialize(cfg, rng);
    const std::size_t n = cfg.scene.users;

    std::vector<MlpGradients> g_se, g_je;
    for (std::size_t u = 0; u < n; ++u) {
        g_se.push_back(codecs.semantic_encoders[u].make_gradients());
        g_je.push_back(codecs.jscc_encoders[u].make_gradients());
    }
    MlpGradients g_jd = codecs.jscc_decoder.make_gradients();
    MlpGradients g_sd = codecs.semantic_decoder.make_gradients();

    std::vector<EncoderCaches> enc_caches(n);
    MlpCache cache_jd, cache_sd;

    std::vector<double> epoch_loss;
    epoch_loss.reserve(tc.epochs);
    double lr = tc.learning_rate;

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < tc.batches_per_epoch; ++b) {
            for (auto& g : g_se) g.zero();
            for (auto& g : g_je) g.zero();
            g_jd.zero();
            g_sd.zero();
            double batch_loss = 0.0;
            const double inv_batch = 1.0 / static_cast<double>(tc.batch_size);

            for (std::size_t s = 0; s < tc.batch_size; ++s) {
                const Scene scene = generate_scene(cfg.scene, rng);
                std::vector<double> dec_in;
                dec_in.reserve(n * 2 * cfg.symbols);
                for (std::size_t u = 0; u < n; ++u) {
                    std::vector<double> xu =
                        forward_encoders(codecs, u, scene.modalities[u], enc_caches[u]);
                    dec_in.insert(dec_in.end(), xu.begin(), xu.end());
                }
                const std::vector<double>& fused =
                    codecs.jscc_decoder.forward(dec_in, cache_jd);
                const std::vector<double>& logits =
                    codecs.semantic_decoder.forward(fused, cache_sd);
                const ProbabilityMap probs =
                    softmax_map(logits, cfg.scene.grid, cfg.scene.grid, cfg.scene.classes);
                batch_loss += cross_entropy(probs, scene.truth);

                std::vector<double> dlogits = cross_entropy_logit_grad(probs, scene.truth);
                for (double& v : dlogits) v *= inv_batch;
                const std::vector<double> dfused =
                    codecs.semantic_decoder.backward(cache_sd, dlogits, g_sd);
                const std::vector<double> ddec_in =
                    codecs.jscc_decoder.backward(cache_jd, dfused, g_jd);
                for (std::size_t u = 0; u < n; ++u) {
                    const std::size_t off = u * 2 * cfg.symbols;
                    std::vector<double> dx(ddec_in.begin() + off,
                                           ddec_in.begin() + off + 2 * cfg.symbols);
                    const std::vector<double> draw = normalization_backward(enc_caches[u], dx);
                    const std::vector<double> df =
                        codecs.jscc_encoders[u].backward(enc_caches[u].jscc, draw, g_je[u]);
                    codecs.semantic_encoders[u].backward(enc_caches[u].semantic, df, g_se[u]);
                }
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch + 1);
            loss_sum += batch_loss;
            for (std::size_t u = 0; u < n; ++u) {
                sgd_step(codecs.semantic_encoders[u], g_se[u], lr);
                sgd_step(codecs.jscc_encoders[u], g_je[u], lr);
            }
            sgd_step(codecs.jscc_decoder, g_jd, lr);
            sgd_step(codecs.semantic_decoder, g_sd, lr);
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(tc.batches_per_epoch));
        lr *= tc.decay;
    }
    return StageResult{std::move(codecs), std::move(epoch_loss)};
}

StageResult train_stage3(SemanticCodecs codecs, const NoisePredictor& csi_enhancer,
                         const NoiseSchedule& schedule, const LinkConfig& link,
                         const TrainConfig& tc) {
    codecs.cfg.validate();
    tc.validate();
    link.validate();
    if (codecs.cfg.scene.users != link.users)
        throw std::invalid_argument("train_stage3: codec user count != link user count");
    Rng rng(tc.rng_seed);
    const CodecConfig& cfg = codecs.cfg;

    MlpGradients g_jd = codecs.jscc_decoder.make_gradients();
    MlpGradients g_sd = codecs.semantic_decoder.make_gradients();
    MlpCache cache_jd, cache_sd;

    std::vector<double> epoch_loss;
    epoch_loss.reserve(tc.epochs);
    double lr = tc.learning_rate;

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < tc.batches_per_epoch; ++b) {
            g_jd.zero();
            g_sd.zero();
            double batch_loss = 0.0;
            const double inv_batch = 1.0 / static_cast<double>(tc.batch_size);

            for (std::size_t s = 0; s < tc.batch_size; ++s) {
                // Constants of this forward pass: everything up to the
                // equalized symbols.
                const Scene scene = generate_scene(cfg.scene, rng);
                const ComplexMatrix x = encode_scene(codecs, scene);
                const ChannelRealization channel = build_channel(link, rng);
                const ComplexMatrix y = transmit(channel.h, x, link.data_noise_variance, rng);
                const CsiEstimate est = estimate_csi(channel, link.pilot_noise_variance, rng);
                const ComplexMatrix h_used = enhance_csi(csi_enhancer, est, schedule, rng);
                const ComplexMatrix x_hat = solve_least_squares(h_used, y);

                const std::vector<double>& fused =
                    codecs.jscc_decoder.forward(stack_equalized(x_hat), cache_jd);
                const std::vector<double>& logits =
                    codecs.semantic_decoder.forward(fused, cache_sd);
                const ProbabilityMap probs =
                    softmax_map(logits, cfg.scene.grid, cfg.scene.grid, cfg.scene.classes);
                batch_loss += cross_entropy(probs, scene.truth);

                std::vector<double> dlogits = cross_entropy_logit_grad(probs, scene.truth);
                for (double& v : dlogits) v *= inv_batch;
                const std::vector<double> dfused =
                    codecs.semantic_decoder.backward(cache_sd, dlogits, g_sd);
                codecs.jscc_decoder.backward(cache_jd, dfused, g_jd);
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch + 1);
            loss_sum += batch_loss;
            sgd_step(codecs.jscc_decoder, g_jd, lr);
            sgd_step(codecs.semantic_decoder, g_sd, lr);
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(tc.batches_per_epoch));
        lr *= tc.decay;
    }
    return StageResult{std::move(codecs), std::move(epoch_loss)};
}

ChannelSampler make_y_sampler(const SemanticCodecs& codecs, const LinkConfig& link) {
    link.validate();
    if (codecs.cfg.scene.users != link.users)
        throw std::invalid_argument("make_y_sampler: codec user count != link user count");
    return [codecs, link](Rng& rng) {
        const Scene scene = generate_scene(codecs.cfg.scene, rng);
        const ComplexMatrix x = encode_scene(codecs, scene);
        const ChannelRealization channel = build_channel(link, rng);
        return matmul(channel.h, x);
    };
}

}  // namespace dmce
