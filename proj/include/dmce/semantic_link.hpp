#pragma once

#include <optional>
#include <vector>

#include "dmce/channel.hpp"
#include "dmce/diffusion.hpp"
#include "dmce/mlp.hpp"
#include "dmce/noise_predictor.hpp"
#include "dmce/scene.hpp"

namespace dmce {

/// Normalized channel-input block of one user: K complex symbols with
/// ||symbols||^2 == power * K.
struct SymbolBlock {
    std::vector<cplx> symbols;
    double power = 1.0;
};

/// Per-cell class probabilities, cell-major: probs[cell * classes + g].
struct ProbabilityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t classes = 0;
    std::vector<double> probs;

    std::size_t cells() const { return height * width; }
    SegmentationMap argmax() const;
};

struct CodecConfig {
    SceneConfig scene;
    std::size_t feature_length = 64;   // semantic features per user
    std::size_t symbols = 128;         // complex channel symbols per user
    double power = 1.0;
    std::size_t encoder_hidden = 128;  // hidden width of the per-user nets
    std::size_t decoder_hidden = 256;  // hidden width of the receiver nets

    void validate() const;
    std::size_t pixels() const { return scene.cells(); }
    std::size_t logits() const { return scene.cells() * scene.classes; }
};

/// The four learned mappings of the link: per-user semantic and JSCC
/// encoders at the transmitters, and the fusing JSCC + semantic decoders
/// at the receiver.
struct SemanticCodecs {
    CodecConfig cfg;
    std::vector<Mlp> semantic_encoders;  // users x (pixels -> features)
    std::vector<Mlp> jscc_encoders;      // users x (features -> 2K reals)
    Mlp jscc_decoder;                    // users*2K reals -> users*features
    Mlp semantic_decoder;                // users*features -> cells*classes logits

    static SemanticCodecs initialize(const CodecConfig& cfg, Rng& rng);
};

std::vector<double> semantic_encode(const Mlp& encoder, const std::vector<double>& image);

/// Forward the JSCC encoder, pair its 2K outputs into K complex symbols
/// (all real parts first, then all imaginary parts) and scale to satisfy
/// the power constraint exactly. Throws on a zero-norm raw output.
SymbolBlock jscc_encode(const Mlp& encoder, const std::vector<double>& features, double power,
                        std::size_t symbol_count);

/// Fused decode of the stacked equalized symbols of all users. Input
/// layout: per user in ascending index order, real parts then imaginary
/// parts of that user's K symbols.
std::vector<double> jscc_decode(const Mlp& decoder, const std::vector<double>& stacked_symbols);

/// Logits -> per-cell probabilities via the normalized exponential.
ProbabilityMap semantic_decode(const Mlp& decoder, const std::vector<double>& features,
                               std::size_t height, std::size_t width, std::size_t classes);

/// Binary-per-class cross entropy of Eq-style one-hot targets, averaged
/// over cells; probabilities are clamped to [1e-12, 1-1e-12] before logs.
double cross_entropy(const ProbabilityMap& pred, const SegmentationMap& truth);

/// Gradient of cross_entropy with respect to the pre-softmax logits,
/// cell-major like ProbabilityMap.
std::vector<double> cross_entropy_logit_grad(const ProbabilityMap& pred,
                                             const SegmentationMap& truth);

enum class LinkMode { kDmce, kNoDmce, kPerfectCsi, kYOriented };

const char* to_string(LinkMode mode);

struct LinkDiagnostics {
    double nmse_initial_db = 0.0;    // pilot estimate vs truth
    double nmse_equalizer_db = 0.0;  // CSI the equalizer actually used
    double csi_error_initial = 0.0;  // ||Hhat - H||_F^2
    double csi_error_used = 0.0;     // ||H_used - H||_F^2
    double csi_truth_energy = 0.0;   // ||H||_F^2
    double symbol_mse = 0.0;         // ||Xhat - X||^2 / (N*K)
    double miou_value = 0.0;
    SegmentationMap predicted;
};

/// One end-to-end link realization: scene -> encode -> normalize ->
/// transmit -> estimate CSI -> (enhance) -> equalize -> fused decode.
/// All random draws shared by the modes happen before the mode branch, so
/// runs with the same generator state differ only downstream of it.
LinkDiagnostics run_link(const LinkConfig& link, const SemanticCodecs& codecs, LinkMode mode,
                         const NoisePredictor* csi_enhancer, const NoisePredictor* y_enhancer,
                         const NoiseSchedule* schedule, Rng& rng);

struct StageResult {
    SemanticCodecs codecs;
    std::vector<double> epoch_loss;
};

/// Stage 1: end-to-end training of all four codecs through a noiseless
/// identity channel, gradients flowing through the power normalization.
StageResult train_stage1(const CodecConfig& cfg, const TrainConfig& tc);

/// Stage 3: full-pipeline fine-tuning of the two decoders with the
/// channel, estimation, enhancement and equalization treated as constants
/// of each forward pass. Encoders and the enhancer stay frozen.
StageResult train_stage3(SemanticCodecs codecs, const NoisePredictor& csi_enhancer,
                         const NoiseSchedule& schedule, const LinkConfig& link,
                         const TrainConfig& tc);

/// Sampler of received-signal matrices HX (no additive noise) for the
/// Y-oriented ablation: scenes are encoded with the frozen codecs and
/// pushed through fresh channel draws.
ChannelSampler make_y_sampler(const SemanticCodecs& codecs, const LinkConfig& link);

}  // namespace dmce
