#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmce/channel.hpp"
#include "dmce/noise_predictor.hpp"
#include "dmce/semantic_link.hpp"

namespace dmce {

/// Everything a reproducible experiment needs: link and scene geometry,
/// diffusion schedule, per-stage SGD settings and the sweep grid.
struct ExperimentConfig {
    std::uint64_t seed = 20240601;

    LinkConfig link;
    CodecConfig codec;

    struct Schedule {
        std::size_t steps = 1000;
        double beta1 = 1e-4;
        double betaT = 0.02;
    } schedule;

    PredictorArch dmce;

    TrainConfig stage1;
    TrainConfig stage2;
    TrainConfig stage3;
    double stage3_snr_db = 0.0;

    struct Sweep {
        std::vector<double> snr_db = {-4, -2, 0, 2, 4, 6, 8, 10, 12};
        std::size_t trials = 200;
        std::vector<LinkMode> modes = {LinkMode::kDmce, LinkMode::kNoDmce,
                                       LinkMode::kPerfectCsi};
    } sweep;

    ExperimentConfig();
    void validate() const;
};

/// Parse the flat `section.key = value` config format. Unknown keys and
/// malformed values raise ConfigError with file and line diagnostics.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// SNR semantics of the sweep axis: the data noise is sigma^2 = P/10^(snr/10)
/// and the pilot noise follows the one-pilot-symbol relation
/// sigma_H^2 = sigma^2 / P.
void apply_snr_db(LinkConfig& link, double snr_db);

/// Per-trial seed derivation: master xor a mix of the grid indices, so
/// trials are independent and order-insensitive under parallel execution.
std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index, std::size_t mode_index,
                         std::size_t trial_index);

struct TrainedSystem {
    SemanticCodecs stage1_codecs;
    SemanticCodecs codecs;  // after stage 3
    NoisePredictor csi_enhancer;
    NoisePredictor y_enhancer;  // trained only when y_oriented is swept
    bool has_y_enhancer = false;
};

/// Checkpoint file names written by cmd_train under the output directory.
struct CheckpointPaths {
    std::string stage1;
    std::string dmce;
    std::string stage3;
    std::string y_oriented;
    std::string manifest;

    static CheckpointPaths in_dir(const std::string& dir);
};

/// Run the three training stages (plus the Y-oriented enhancer when that
/// mode is swept) and write one checkpoint per stage and a manifest.
TrainedSystem cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
                        std::ostream* log = nullptr);

/// Load what cmd_train wrote.
TrainedSystem load_system(const ExperimentConfig& cfg, const CheckpointPaths& paths);

struct SweepRow {
    double snr_db = 0.0;
    LinkMode mode = LinkMode::kDmce;
    std::size_t trials = 0;
    double mean_miou = 0.0;
    double ci95_miou = 0.0;
    double mean_nmse_db_initial = 0.0;   // pooled over trials
    double mean_nmse_db_enhanced = 0.0;  // CSI used by the equalizer, pooled
    double mean_symbol_mse = 0.0;
};

/// One row per (snr_db, mode), sorted by snr then mode declaration order.
/// Trials run in parallel across `threads` workers; the output is
/// independent of the execution order.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg, const TrainedSystem& system,
                                std::size_t threads, std::ostream* log = nullptr);

/// CSV with the fixed column contract:
/// snr_db,mode,trials,mean_miou,ci95_miou,mean_nmse_db_initial,
/// mean_nmse_db_enhanced,mean_symbol_mse
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Text CSI file: header "M N sigmaH2", then M rows of N entries
/// "<re>+<im>j" with 17 significant digits.
void write_csi_file(const std::string& path, const ComplexMatrix& h, double sigma_h_sq);
std::pair<ComplexMatrix, double> read_csi_file(const std::string& path);

/// Standalone enhancement of a CSI file through a trained predictor.
void cmd_enhance(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const std::string& csi_in, const std::string& csi_out, std::uint64_t seed);

/// Quick invariant checks; returns the number of failures and prints one
/// line per check.
int cmd_selftest(std::ostream& out);

}  // namespace dmce
