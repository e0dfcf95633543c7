#include "dmce/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "dmce/checkpoint.hpp"
#include "dmce/diffusion.hpp"
#include "dmce/errors.hpp"
#include "dmce/metrics.hpp"

namespace dmce {

namespace fs = std::filesystem;

ExperimentConfig::ExperimentConfig() {
    link.model = ChannelModel::kCodebook;

    stage1.learning_rate = 0.35;
    stage1.decay = 0.993;
    stage1.epochs = 300;
    stage1.batch_size = 8;
    stage1.batches_per_epoch = 100;

    stage2.learning_rate = 0.1;
    stage2.decay = 0.97;
    stage2.epochs = 100;
    stage2.batch_size = 32;
    stage2.batches_per_epoch = 200;

    stage3.learning_rate = 0.01;
    stage3.decay = 0.95;
    stage3.epochs = 60;
    stage3.batch_size = 8;
    stage3.batches_per_epoch = 25;
}

void ExperimentConfig::validate() const {
    link.validate();
    codec.validate();
    stage1.validate();
    stage2.validate();
    stage3.validate();
    if (schedule.steps < 2 || !(schedule.beta1 > 0.0) || !(schedule.beta1 <= schedule.betaT) ||
        !(schedule.betaT < 1.0))
        throw ConfigError("schedule: need steps >= 2 and 0 < beta1 <= betaT < 1");
    if (sweep.snr_db.empty()) throw ConfigError("sweep.snr_db: list must be nonempty");
    if (sweep.trials < 1) throw ConfigError("sweep.trials: must be >= 1");
    if (sweep.modes.empty()) throw ConfigError("sweep.modes: list must be nonempty");
    if (link.users != codec.scene.users)
        throw ConfigError("link.users must equal scene.users");
    if (link.block_length != codec.symbols)
        throw ConfigError("link.block_length must equal codec.symbols");
    if (link.power != codec.power) throw ConfigError("link.power must equal codec.power");
}

void apply_snr_db(LinkConfig& link, double snr_db) {
    link.data_noise_variance = snr_db_to_noise_variance(snr_db, link.power);
    // One pilot symbol at power P.
    link.pilot_noise_variance = link.data_noise_variance / link.power;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index, std::size_t mode_index,
                         std::size_t trial_index) {
    std::uint64_t h = mix64(0x5dee326a9f12ed1dULL ^ snr_index);
    h = mix64(h ^ mode_index);
    h = mix64(h ^ trial_index);
    return master ^ h;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& file, int line) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(file, line, "expected a number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(file, line, "trailing characters in number '" + v + "'");
    return d;
}

std::uint64_t parse_u64(const std::string& v, const std::string& file, int line) {
    std::size_t pos = 0;
    unsigned long long u = 0;
    try {
        u = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(file, line, "expected an unsigned integer, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError(file, line, "trailing characters in integer '" + v + "'");
    return u;
}

std::size_t parse_count(const std::string& v, const std::string& file, int line) {
    return static_cast<std::size_t>(parse_u64(v, file, line));
}

bool parse_bool(const std::string& v, const std::string& file, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(file, line, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

ChannelModel parse_channel_model(const std::string& v, const std::string& file, int line) {
    if (v == "codebook") return ChannelModel::kCodebook;
    if (v == "rayleigh") return ChannelModel::kRayleigh;
    if (v == "ray_tracing") return ChannelModel::kRayTracing;
    throw ConfigError(file, line, "unknown channel model '" + v + "'");
}

LinkMode parse_mode(const std::string& v, const std::string& file, int line) {
    if (v == "dmce") return LinkMode::kDmce;
    if (v == "no_dmce") return LinkMode::kNoDmce;
    if (v == "perfect_csi") return LinkMode::kPerfectCsi;
    if (v == "y_oriented") return LinkMode::kYOriented;
    throw ConfigError(file, line, "unknown mode '" + v + "'");
}

const char* channel_model_name(ChannelModel m) {
    switch (m) {
        case ChannelModel::kCodebook: return "codebook";
        case ChannelModel::kRayleigh: return "rayleigh";
        case ChannelModel::kRayTracing: return "ray_tracing";
    }
    return "?";
}

void assign_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                const std::string& file, int line) {
    auto d = [&] { return parse_double(value, file, line); };
    auto n = [&] { return parse_count(value, file, line); };

    if (key == "seed") cfg.seed = parse_u64(value, file, line);
    else if (key == "link.users") cfg.link.users = cfg.codec.scene.users = n();
    else if (key == "link.rx_antennas") cfg.link.rx_antennas = n();
    else if (key == "link.block_length") cfg.link.block_length = cfg.codec.symbols = n();
    else if (key == "link.power") cfg.link.power = cfg.codec.power = d();
    else if (key == "link.paths") cfg.link.path_count = n();
    else if (key == "link.channel_model") cfg.link.model = parse_channel_model(value, file, line);
    else if (key == "link.carrier_frequency") cfg.link.carrier_frequency_hz = d();
    else if (key == "link.codebook_jitter") cfg.link.codebook_jitter = d();
    else if (key == "link.codebook_size") cfg.link.codebook_size = n();
    else if (key == "scene.grid") cfg.codec.scene.grid = n();
    else if (key == "scene.classes") cfg.codec.scene.classes = n();
    else if (key == "scene.rectangles") cfg.codec.scene.rectangles = n();
    else if (key == "scene.min_rect") cfg.codec.scene.min_rect = n();
    else if (key == "scene.max_rect") cfg.codec.scene.max_rect = n();
    else if (key == "scene.pixel_noise") cfg.codec.scene.pixel_noise = d();
    else if (key == "scene.background_fraction") cfg.codec.scene.expected_background_fraction = d();
    else if (key == "codec.feature_length") cfg.codec.feature_length = n();
    else if (key == "codec.encoder_hidden") cfg.codec.encoder_hidden = n();
    else if (key == "codec.decoder_hidden") cfg.codec.decoder_hidden = n();
    else if (key == "schedule.steps") cfg.schedule.steps = n();
    else if (key == "schedule.beta1") cfg.schedule.beta1 = d();
    else if (key == "schedule.betaT") cfg.schedule.betaT = d();
    else if (key == "dmce.hidden_width") cfg.dmce.hidden_width = n();
    else if (key == "dmce.hidden_layers") cfg.dmce.hidden_layers = n();
    else if (key == "dmce.time_embedding_dim") cfg.dmce.time_embedding_dim = n();
    else if (key == "dmce.condition_on_estimate")
        cfg.dmce.condition_on_estimate = parse_bool(value, file, line);
    else if (key == "train.stage1.learning_rate") cfg.stage1.learning_rate = d();
    else if (key == "train.stage1.decay") cfg.stage1.decay = d();
    else if (key == "train.stage1.epochs") cfg.stage1.epochs = n();
    else if (key == "train.stage1.batch_size") cfg.stage1.batch_size = n();
    else if (key == "train.stage1.batches_per_epoch") cfg.stage1.batches_per_epoch = n();
    else if (key == "train.stage2.learning_rate") cfg.stage2.learning_rate = d();
    else if (key == "train.stage2.decay") cfg.stage2.decay = d();
    else if (key == "train.stage2.epochs") cfg.stage2.epochs = n();
    else if (key == "train.stage2.batch_size") cfg.stage2.batch_size = n();
    else if (key == "train.stage2.batches_per_epoch") cfg.stage2.batches_per_epoch = n();
    else if (key == "train.stage3.learning_rate") cfg.stage3.learning_rate = d();
    else if (key == "train.stage3.decay") cfg.stage3.decay = d();
    else if (key == "train.stage3.epochs") cfg.stage3.epochs = n();
    else if (key == "train.stage3.batch_size") cfg.stage3.batch_size = n();
    else if (key == "train.stage3.batches_per_epoch") cfg.stage3.batches_per_epoch = n();
    else if (key == "train.stage3.snr_db") cfg.stage3_snr_db = d();
    else if (key == "sweep.trials") cfg.sweep.trials = n();
    else if (key == "sweep.snr_db") {
        cfg.sweep.snr_db.clear();
        for (const std::string& item : split_list(value))
            cfg.sweep.snr_db.push_back(parse_double(item, file, line));
    } else if (key == "sweep.modes") {
        cfg.sweep.modes.clear();
        for (const std::string& item : split_list(value))
            cfg.sweep.modes.push_back(parse_mode(item, file, line));
    } else {
        throw ConfigError(file, line, "unknown key '" + key + "'");
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    int line = 0;
    while (std::getline(ss, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string stripped = trim(raw);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin, line, "expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin, line, "empty key");
        if (value.empty()) throw ConfigError(origin, line, "empty value for '" + key + "'");
        assign_key(cfg, key, value, origin, line);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Training orchestration
// ---------------------------------------------------------------------------

CheckpointPaths CheckpointPaths::in_dir(const std::string& dir) {
    CheckpointPaths p;
    p.stage1 = (fs::path(dir) / "codecs_stage1.ckpt").string();
    p.dmce = (fs::path(dir) / "dmce.ckpt").string();
    p.stage3 = (fs::path(dir) / "codecs_stage3.ckpt").string();
    p.y_oriented = (fs::path(dir) / "dmce_y.ckpt").string();
    p.manifest = (fs::path(dir) / "manifest.txt").string();
    return p;
}

namespace {

bool wants_mode(const ExperimentConfig& cfg, LinkMode mode) {
    return std::find(cfg.sweep.modes.begin(), cfg.sweep.modes.end(), mode) !=
           cfg.sweep.modes.end();
}

std::vector<NamedMlp> codec_sections(const SemanticCodecs& codecs) {
    std::vector<NamedMlp> nets;
    for (std::size_t u = 0; u < codecs.semantic_encoders.size(); ++u)
        nets.emplace_back("sem_enc_" + std::to_string(u), codecs.semantic_encoders[u]);
    for (std::size_t u = 0; u < codecs.jscc_encoders.size(); ++u)
        nets.emplace_back("jscc_enc_" + std::to_string(u), codecs.jscc_encoders[u]);
    nets.emplace_back("jscc_dec", codecs.jscc_decoder);
    nets.emplace_back("sem_dec", codecs.semantic_decoder);
    return nets;
}

SemanticCodecs codecs_from_sections(const CodecConfig& cfg, const std::vector<NamedMlp>& nets,
                                    const std::string& origin) {
    Rng dummy(0);
    SemanticCodecs expect = SemanticCodecs::initialize(cfg, dummy);
    SemanticCodecs out;
    out.cfg = cfg;
    out.semantic_encoders.resize(cfg.scene.users);
    out.jscc_encoders.resize(cfg.scene.users);
    std::size_t found = 0;
    auto match = [&](const std::string& name, const Mlp& net, Mlp& slot, const Mlp& expected) {
        if (net.layer_dims() != expected.layer_dims())
            throw ConfigError(origin + ": section '" + name +
                              "' dimensions do not match the configuration");
        slot = net;
        ++found;
    };
    for (const auto& [name, net] : nets) {
        for (std::size_t u = 0; u < cfg.scene.users; ++u) {
            if (name == "sem_enc_" + std::to_string(u))
                match(name, net, out.semantic_encoders[u], expect.semantic_encoders[u]);
            else if (name == "jscc_enc_" + std::to_string(u))
                match(name, net, out.jscc_encoders[u], expect.jscc_encoders[u]);
        }
        if (name == "jscc_dec") match(name, net, out.jscc_decoder, expect.jscc_decoder);
        if (name == "sem_dec") match(name, net, out.semantic_decoder, expect.semantic_decoder);
    }
    if (found != 2 * cfg.scene.users + 2)
        throw ConfigError(origin + ": checkpoint is missing codec sections");
    return out;
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const TrainedSystem& system, const CheckpointPaths& paths) {
    std::ostringstream os;
    os << "seed = " << cfg.seed << "\n";
    os << "link.users = " << cfg.link.users << "\n";
    os << "link.rx_antennas = " << cfg.link.rx_antennas << "\n";
    os << "link.block_length = " << cfg.link.block_length << "\n";
    os << "link.power = " << cfg.link.power << "\n";
    os << "link.paths = " << cfg.link.path_count << "\n";
    os << "link.channel_model = " << channel_model_name(cfg.link.model) << "\n";
    os << "link.codebook_jitter = " << cfg.link.codebook_jitter << "\n";
    os << "link.codebook_size = " << cfg.link.codebook_size << "\n";
    os << "scene.grid = " << cfg.codec.scene.grid << "\n";
    os << "scene.classes = " << cfg.codec.scene.classes << "\n";
    os << "scene.rectangles = " << cfg.codec.scene.rectangles << "\n";
    os << "scene.pixel_noise = " << cfg.codec.scene.pixel_noise << "\n";
    os << "codec.feature_length = " << cfg.codec.feature_length << "\n";
    os << "schedule.steps = " << cfg.schedule.steps << "\n";
    os << "schedule.beta1 = " << cfg.schedule.beta1 << "\n";
    os << "schedule.betaT = " << cfg.schedule.betaT << "\n";
    auto stage = [&os](const char* name, const TrainConfig& tc) {
        os << name << ".learning_rate = " << tc.learning_rate << "\n";
        os << name << ".decay = " << tc.decay << "\n";
        os << name << ".epochs = " << tc.epochs << "\n";
        os << name << ".batch_size = " << tc.batch_size << "\n";
        os << name << ".batches_per_epoch = " << tc.batches_per_epoch << "\n";
        os << name << ".rng_seed = " << tc.rng_seed << "\n";
    };
    TrainConfig t1 = cfg.stage1, t2 = cfg.stage2, t3 = cfg.stage3;
    t1.rng_seed = mix64(cfg.seed ^ 1);
    t2.rng_seed = mix64(cfg.seed ^ 2);
    t3.rng_seed = mix64(cfg.seed ^ 3);
    stage("train.stage1", t1);
    stage("train.stage2", t2);
    stage("train.stage3", t3);
    os << "train.stage3.snr_db = " << cfg.stage3_snr_db << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", system.csi_enhancer.train_signal_power());
    os << "dmce.train_signal_power = " << buf << "\n";
    if (system.has_y_enhancer) {
        std::snprintf(buf, sizeof(buf), "%.17g", system.y_enhancer.train_signal_power());
        os << "y_oriented.train_signal_power = " << buf << "\n";
    }
    os << "checkpoint.stage1 = " << fs::path(paths.stage1).filename().string() << "\n";
    os << "checkpoint.dmce = " << fs::path(paths.dmce).filename().string() << "\n";
    os << "checkpoint.stage3 = " << fs::path(paths.stage3).filename().string() << "\n";
    if (system.has_y_enhancer)
        os << "checkpoint.y_oriented = " << fs::path(paths.y_oriented).filename().string() << "\n";

    std::ofstream file(path, std::ios::trunc);
    if (!file) throw ConfigError(path + ": cannot open for writing");
    file << os.str();
}

}  // namespace

TrainedSystem cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
                        std::ostream* log) {
    cfg.validate();
    fs::create_directories(out_dir);
    const CheckpointPaths paths = CheckpointPaths::in_dir(out_dir);
    const NoiseSchedule schedule =
        linear_schedule(cfg.schedule.steps, cfg.schedule.beta1, cfg.schedule.betaT);

    TrainConfig tc1 = cfg.stage1;
    tc1.rng_seed = mix64(cfg.seed ^ 1);
    if (log) *log << "stage 1: training codecs (noiseless identity channel)\n";
    StageResult s1 = train_stage1(cfg.codec, tc1);
    save_mlp_bundle(paths.stage1, codec_sections(s1.codecs));
    if (log)
        *log << "stage 1: loss " << s1.epoch_loss.front() << " -> " << s1.epoch_loss.back()
             << "\n";

    TrainConfig tc2 = cfg.stage2;
    tc2.rng_seed = mix64(cfg.seed ^ 2);
    const LinkConfig link = cfg.link;
    ChannelSampler sampler = [link](Rng& rng) { return build_channel(link, rng).h; };
    if (log) *log << "stage 2: training the noise predictor\n";
    PredictorTrainResult s2 = train_noise_predictor(sampler, cfg.link.rx_antennas, cfg.link.users,
                                                    schedule, tc2, cfg.dmce);
    save_predictor(paths.dmce, s2.predictor);
    if (log)
        *log << "stage 2: loss " << s2.epoch_loss.front() << " -> " << s2.epoch_loss.back()
             << "\n";

    TrainConfig tc3 = cfg.stage3;
    tc3.rng_seed = mix64(cfg.seed ^ 3);
    LinkConfig link3 = cfg.link;
    apply_snr_db(link3, cfg.stage3_snr_db);
    if (log) *log << "stage 3: fine-tuning decoders through the full pipeline\n";
    StageResult s3 = train_stage3(s1.codecs, s2.predictor, schedule, link3, tc3);
    save_mlp_bundle(paths.stage3, codec_sections(s3.codecs));
    if (log)
        *log << "stage 3: loss " << s3.epoch_loss.front() << " -> " << s3.epoch_loss.back()
             << "\n";

    TrainedSystem system{std::move(s1.codecs), std::move(s3.codecs), std::move(s2.predictor),
                         NoisePredictor{}, false};

    if (wants_mode(cfg, LinkMode::kYOriented)) {
        TrainConfig tcy = cfg.stage2;
        tcy.rng_seed = mix64(cfg.seed ^ 4);
        if (log) *log << "y-oriented: training the received-signal denoiser\n";
        PredictorTrainResult sy =
            train_noise_predictor(make_y_sampler(system.codecs, cfg.link), cfg.link.rx_antennas,
                                  cfg.link.block_length, schedule, tcy, cfg.dmce);
        save_predictor(paths.y_oriented, sy.predictor);
        system.y_enhancer = std::move(sy.predictor);
        system.has_y_enhancer = true;
    }

    write_manifest(paths.manifest, cfg, system, paths);
    return system;
}

TrainedSystem load_system(const ExperimentConfig& cfg, const CheckpointPaths& paths) {
    TrainedSystem system;
    system.stage1_codecs =
        codecs_from_sections(cfg.codec, load_mlp_bundle(paths.stage1), paths.stage1);
    system.codecs = codecs_from_sections(cfg.codec, load_mlp_bundle(paths.stage3), paths.stage3);
    system.csi_enhancer = load_predictor(paths.dmce);
    const std::size_t want = 2 * cfg.link.rx_antennas * cfg.link.users;
    if (system.csi_enhancer.data_dim() != want)
        throw ConfigError(paths.dmce + ": predictor dimension " +
                          std::to_string(system.csi_enhancer.data_dim()) +
                          " does not match the configured link (" + std::to_string(want) + ")");
    if (wants_mode(cfg, LinkMode::kYOriented)) {
        system.y_enhancer = load_predictor(paths.y_oriented);
        const std::size_t want_y = 2 * cfg.link.rx_antennas * cfg.link.block_length;
        if (system.y_enhancer.data_dim() != want_y)
            throw ConfigError(paths.y_oriented + ": predictor dimension does not match Y");
        system.has_y_enhancer = true;
    }
    return system;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

struct TrialResult {
    double miou = 0.0;
    double err_initial = 0.0;
    double err_used = 0.0;
    double truth_energy = 0.0;
    double symbol_mse = 0.0;
};

double pooled_db(double err, double ref) {
    if (!(ref > 0.0) || err <= 0.0) return kNmseFloorDb;
    return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg, const TrainedSystem& system,
                                std::size_t threads, std::ostream* log) {
    cfg.validate();
    if (wants_mode(cfg, LinkMode::kYOriented) && !system.has_y_enhancer)
        throw ConfigError("sweep: y_oriented mode requested but no Y denoiser was trained");
    const NoiseSchedule schedule =
        linear_schedule(cfg.schedule.steps, cfg.schedule.beta1, cfg.schedule.betaT);

    const std::size_t snr_count = cfg.sweep.snr_db.size();
    const std::size_t mode_count = cfg.sweep.modes.size();
    const std::size_t trials = cfg.sweep.trials;
    const std::size_t total = snr_count * mode_count * trials;
    std::vector<TrialResult> results(total);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total) return;
            const std::size_t snr_i = job / (mode_count * trials);
            const std::size_t mode_i = (job / trials) % mode_count;
            const std::size_t trial_i = job % trials;

            LinkConfig link = cfg.link;
            apply_snr_db(link, cfg.sweep.snr_db[snr_i]);
            Rng rng(trial_seed(cfg.seed, snr_i, mode_i, trial_i));
            const LinkMode mode = cfg.sweep.modes[mode_i];
            const LinkDiagnostics diag =
                run_link(link, system.codecs, mode, &system.csi_enhancer,
                         system.has_y_enhancer ? &system.y_enhancer : nullptr, &schedule, rng);

            TrialResult& r = results[job];
            r.miou = diag.miou_value;
            r.symbol_mse = diag.symbol_mse;
            r.err_initial = diag.csi_error_initial;
            r.err_used = diag.csi_error_used;
            r.truth_energy = diag.csi_truth_energy;
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<SweepRow> rows;
    rows.reserve(snr_count * mode_count);
    for (std::size_t snr_i = 0; snr_i < snr_count; ++snr_i) {
        for (std::size_t mode_i = 0; mode_i < mode_count; ++mode_i) {
            SweepRow row;
            row.snr_db = cfg.sweep.snr_db[snr_i];
            row.mode = cfg.sweep.modes[mode_i];
            row.trials = trials;
            double err_i = 0.0, err_u = 0.0, ref = 0.0, mse = 0.0;
            double miou_sum = 0.0, miou_sq = 0.0;
            for (std::size_t t = 0; t < trials; ++t) {
                const TrialResult& r = results[(snr_i * mode_count + mode_i) * trials + t];
                miou_sum += r.miou;
                miou_sq += r.miou * r.miou;
                err_i += r.err_initial;
                err_u += r.err_used;
                ref += r.truth_energy;
                mse += r.symbol_mse;
            }
            const double n = static_cast<double>(trials);
            row.mean_miou = miou_sum / n;
            const double var = std::max(0.0, miou_sq / n - row.mean_miou * row.mean_miou);
            row.ci95_miou = trials > 1 ? 1.96 * std::sqrt(var / (n - 1.0)) : 0.0;
            row.mean_nmse_db_initial = pooled_db(err_i, ref);
            row.mean_nmse_db_enhanced = pooled_db(err_u, ref);
            row.mean_symbol_mse = mse / n;
            rows.push_back(row);
            if (log)
                *log << "snr " << row.snr_db << " " << to_string(row.mode) << ": mIoU "
                     << row.mean_miou << ", csi " << row.mean_nmse_db_initial << " -> "
                     << row.mean_nmse_db_enhanced << " dB\n";
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out =
        "snr_db,mode,trials,mean_miou,ci95_miou,mean_nmse_db_initial,"
        "mean_nmse_db_enhanced,mean_symbol_mse\n";
    char buf[256];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%g,%s,%zu,%.6f,%.6f,%.4f,%.4f,%.6e\n", r.snr_db,
                      to_string(r.mode), r.trials, r.mean_miou, r.ci95_miou,
                      r.mean_nmse_db_initial, r.mean_nmse_db_enhanced, r.mean_symbol_mse);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSI file format
// ---------------------------------------------------------------------------

void write_csi_file(const std::string& path, const ComplexMatrix& h, double sigma_h_sq) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError(path + ": cannot open for writing");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu %zu %.17g\n", h.rows(), h.cols(), sigma_h_sq);
    os << buf;
    for (std::size_t r = 0; r < h.rows(); ++r) {
        for (std::size_t c = 0; c < h.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g%+.17gj", h(r, c).real(), h(r, c).imag());
            os << (c == 0 ? "" : " ") << buf;
        }
        os << "\n";
    }
    if (!os) throw ConfigError(path + ": write failed");
}

std::pair<ComplexMatrix, double> read_csi_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path + ": cannot open");
    std::size_t rows = 0, cols = 0;
    double sigma_h_sq = 0.0;
    std::string header;
    if (!std::getline(is, header)) throw ConfigError(path + ": empty file");
    if (std::sscanf(header.c_str(), "%zu %zu %lf", &rows, &cols, &sigma_h_sq) != 3)
        throw ConfigError(path, 1, "expected header 'M N sigmaH2'");
    if (rows == 0 || cols == 0 || sigma_h_sq < 0.0)
        throw ConfigError(path, 1, "invalid header values");

    ComplexMatrix h(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::string line;
        if (!std::getline(is, line)) throw ConfigError(path + ": truncated matrix");
        const char* p = line.c_str();
        for (std::size_t c = 0; c < cols; ++c) {
            char* end = nullptr;
            const double re = std::strtod(p, &end);
            if (end == p)
                throw ConfigError(path, static_cast<int>(r + 2), "malformed entry");
            p = end;
            const double im = std::strtod(p, &end);
            if (end == p || *end != 'j')
                throw ConfigError(path, static_cast<int>(r + 2),
                                  "expected '<re>+<im>j' entry");
            p = end + 1;
            h(r, c) = cplx{re, im};
        }
    }
    return {std::move(h), sigma_h_sq};
}

void cmd_enhance(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const std::string& csi_in, const std::string& csi_out, std::uint64_t seed) {
    const NoisePredictor predictor = load_predictor(checkpoint);
    auto [h, sigma_h_sq] = read_csi_file(csi_in);
    if (2 * h.size() != predictor.data_dim())
        throw ConfigError(csi_in + ": matrix dimension does not match the checkpoint (" +
                          std::to_string(2 * h.size()) + " vs " +
                          std::to_string(predictor.data_dim()) + ")");
    const NoiseSchedule schedule =
        linear_schedule(cfg.schedule.steps, cfg.schedule.beta1, cfg.schedule.betaT);
    Rng rng(seed);
    CsiEstimate est{std::move(h), sigma_h_sq};
    const ComplexMatrix enhanced = enhance_csi(predictor, est, schedule, rng);
    write_csi_file(csi_out, enhanced, sigma_h_sq);
}

// ---------------------------------------------------------------------------
// Self test
// ---------------------------------------------------------------------------

namespace {

bool report(std::ostream& out, const char* name, bool ok) {
    out << (ok ? "ok   " : "FAIL ") << name << "\n";
    return ok;
}

}  // namespace

int cmd_selftest(std::ostream& out) {
    int failures = 0;
    Rng rng(424242);

    {
        bool ok = true;
        for (int it = 0; it < 20 && ok; ++it) {
            ComplexMatrix a(3, 4), b(4, 2);
            for (cplx& z : a.data()) z = cplx{rng.normal(), rng.normal()};
            for (cplx& z : b.data()) z = cplx{rng.normal(), rng.normal()};
            ComplexMatrix ab = matmul(a, b);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 2; ++j) {
                    cplx acc{0, 0};
                    for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
                    if (std::abs(acc - ab(i, j)) > 1e-12) ok = false;
                }
        }
        if (!report(out, "matmul agrees with the naive oracle", ok)) ++failures;
    }
    {
        bool ok = true;
        for (int it = 0; it < 20 && ok; ++it) {
            ComplexMatrix h(4, 2), x(2, 3);
            for (cplx& z : h.data()) z = cplx{rng.normal(), rng.normal()};
            for (cplx& z : x.data()) z = cplx{rng.normal(), rng.normal()};
            ComplexMatrix rec = solve_least_squares(h, matmul(h, x));
            if (frobenius_norm_sq(rec - x) > 1e-18 * frobenius_norm_sq(x)) ok = false;
        }
        if (!report(out, "least squares recovers planted solutions", ok)) ++failures;
    }
    {
        const NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
        bool ok = true;
        for (std::size_t t = 2; t <= s.steps(); ++t)
            if (!(s.alpha_bar(t) < s.alpha_bar(t - 1))) ok = false;
        std::vector<double> x0(8), eps(8);
        for (double& v : x0) v = rng.normal();
        for (double& v : eps) v = rng.normal();
        const std::vector<double> x_t = q_sample(x0, 321, eps, s);
        for (std::size_t i = 0; i < 8; ++i) {
            const double rec = (x_t[i] - std::sqrt(1.0 - s.alpha_bar(321)) * eps[i]) /
                               std::sqrt(s.alpha_bar(321));
            if (std::abs(rec - x0[i]) > 1e-12) ok = false;
        }
        std::size_t prev = 1;
        for (double v = 0.0; v <= 1.0; v += 0.02) {
            const std::size_t t = select_entry_step(v, s);
            if (t < prev) ok = false;
            prev = t;
        }
        if (!report(out, "diffusion schedule and forward algebra", ok)) ++failures;
    }
    {
        Rng init(7);
        Mlp enc({16, 8, 12}, init);
        bool ok = true;
        for (int it = 0; it < 200 && ok; ++it) {
            std::vector<double> f(16);
            for (double& v : f) v = rng.normal();
            const SymbolBlock b = jscc_encode(enc, f, 1.5, 6);
            double norm_sq = 0.0;
            for (const cplx& z : b.symbols) norm_sq += std::norm(z);
            if (std::abs(norm_sq - 1.5 * 6) > 1e-9 * 1.5 * 6) ok = false;
        }
        if (!report(out, "power normalization invariant", ok)) ++failures;
    }
    {
        bool ok = true;
        for (int it = 0; it < 20 && ok; ++it) {
            SegmentationMap a, b;
            a.height = a.width = b.height = b.width = 6;
            a.classes = b.classes = 3;
            a.labels.resize(36);
            b.labels.resize(36);
            for (auto& v : a.labels) v = static_cast<int>(rng.uniform_index(3));
            for (auto& v : b.labels) v = static_cast<int>(rng.uniform_index(3));
            // Set-based oracle: per class, count intersection and union.
            double sum = 0.0;
            std::size_t used = 0;
            for (int g = 0; g < 3; ++g) {
                std::size_t inter = 0, uni = 0;
                for (std::size_t i = 0; i < 36; ++i) {
                    const bool in_a = a.labels[i] == g;
                    const bool in_b = b.labels[i] == g;
                    inter += (in_a && in_b) ? 1 : 0;
                    uni += (in_a || in_b) ? 1 : 0;
                }
                if (uni > 0) {
                    sum += static_cast<double>(inter) / static_cast<double>(uni);
                    ++used;
                }
            }
            const double oracle = used > 0 ? sum / used : 0.0;
            if (miou(a, b) != oracle) ok = false;
        }
        if (!report(out, "mIoU equals the set-intersection oracle", ok)) ++failures;
    }
    {
        LinkConfig link;
        Rng a(99), b(99);
        const bool ok = build_channel(link, a).h == build_channel(link, b).h;
        if (!report(out, "channel draws are seed-deterministic", ok)) ++failures;
    }
    return failures;
}

}  // namespace dmce
