#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dmce/errors.hpp"
#include "dmce/experiment.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

dmce::ExperimentConfig load_config(const std::string& config_path, bool seed_given,
                                   std::uint64_t seed) {
    dmce::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = dmce::parse_config_file(config_path);
    if (seed_given) cfg.seed = seed;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link-level simulator for diffusion-enhanced multi-user semantic communication"};
    app.require_subcommand(1);
    app.fallthrough();  // accept the global flags after the subcommand too

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t threads = 1;

    app.add_option("--config", config_path, "experiment config file (key = value)");
    app.add_option("--seed", seed, "override the master seed")->each([&](const std::string&) {
        seed_given = true;
    });
    app.add_option("--out", out_dir, "output directory for checkpoints and CSV");
    app.add_option("--threads", threads, "worker threads for the sweep")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "run the three training stages, write checkpoints");
    auto* sweep = app.add_subcommand("sweep", "evaluate trained checkpoints over the SNR grid");
    auto* enhance = app.add_subcommand("enhance", "denoise one CSI file through a checkpoint");
    auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");

    std::string enhance_ckpt, enhance_in, enhance_out;
    enhance->add_option("checkpoint", enhance_ckpt, "noise-predictor checkpoint")->required();
    enhance->add_option("input", enhance_in, "CSI file to enhance")->required();
    enhance->add_option("output", enhance_out, "where to write the enhanced CSI")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const dmce::ExperimentConfig cfg = load_config(config_path, seed_given, seed);
            dmce::cmd_train(cfg, out_dir, &std::cout);
            std::cout << "checkpoints written to " << out_dir << "\n";
        } else if (sweep->parsed()) {
            const dmce::ExperimentConfig cfg = load_config(config_path, seed_given, seed);
            const auto paths = dmce::CheckpointPaths::in_dir(out_dir);
            const dmce::TrainedSystem system = dmce::load_system(cfg, paths);
            const auto rows = dmce::cmd_sweep(cfg, system, threads, &std::cout);
            const std::string csv = dmce::sweep_csv(rows);
            const std::string csv_path =
                (std::filesystem::path(out_dir) / "sweep.csv").string();
            std::ofstream os(csv_path, std::ios::trunc);
            if (!os) throw dmce::ConfigError(csv_path + ": cannot open for writing");
            os << csv;
            std::cout << "wrote " << csv_path << "\n";
        } else if (enhance->parsed()) {
            const dmce::ExperimentConfig cfg = load_config(config_path, seed_given, seed);
            dmce::cmd_enhance(cfg, enhance_ckpt, enhance_in, enhance_out,
                              seed_given ? seed : cfg.seed);
        } else if (selftest->parsed()) {
            const int failures = dmce::cmd_selftest(std::cout);
            if (failures > 0) {
                std::cerr << failures << " selftest check(s) failed\n";
                return kExitNumericalError;
            }
        }
    } catch (const dmce::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
    return 0;
}
