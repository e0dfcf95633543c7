#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmce/errors.hpp"
#include "dmce/metrics.hpp"
#include "dmce/semantic_link.hpp"

using namespace dmce;

namespace {

// Small dimensions keep the training tests fast.
CodecConfig tiny_config() {
    CodecConfig cfg;
    cfg.scene.grid = 6;
    cfg.scene.classes = 3;
    cfg.scene.users = 2;
    cfg.scene.rectangles = 1;
    cfg.scene.min_rect = 2;
    cfg.scene.max_rect = 4;
    cfg.feature_length = 12;
    cfg.symbols = 16;
    cfg.encoder_hidden = 24;
    cfg.decoder_hidden = 32;
    return cfg;
}

LinkConfig tiny_link() {
    LinkConfig link;
    link.users = 2;
    link.rx_antennas = 2;
    link.block_length = 16;
    link.model = ChannelModel::kCodebook;
    return link;
}

}  // namespace

TEST_CASE("scene generation is deterministic and shaped") {
    SceneConfig cfg;
    Rng a(42), b(42);
    Scene sa = generate_scene(cfg, a);
    Scene sb = generate_scene(cfg, b);
    CHECK(sa.truth == sb.truth);
    CHECK(sa.modalities == sb.modalities);
    CHECK(sa.truth.cells() == cfg.cells());
    CHECK(sa.modalities.size() == cfg.users);
    for (int v : sa.truth.labels) {
        CHECK(v >= 0);
        CHECK(v < static_cast<int>(cfg.classes));
    }
}

TEST_CASE("degenerate background-only scene is near constant") {
    SceneConfig cfg;
    cfg.rectangles = 0;
    cfg.pixel_noise = 0.0;
    Rng rng(7);
    Scene s = generate_scene(cfg, rng);
    for (int v : s.truth.labels) CHECK(v == 0);
    for (std::size_t u = 0; u < cfg.users; ++u)
        for (double px : s.modalities[u])
            CHECK(px == doctest::Approx(modality_intensity(cfg, u, 0)).epsilon(1e-12));
}

TEST_CASE("background fraction matches the configured target") {
    SceneConfig cfg;
    Rng rng(99);
    double bg = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        Scene s = generate_scene(cfg, rng);
        int count = 0;
        for (int v : s.truth.labels) count += (v == 0) ? 1 : 0;
        bg += static_cast<double>(count) / cfg.cells();
    }
    bg /= trials;
    CHECK(bg > 0.5);  // background majority
    CHECK(std::abs(bg - cfg.expected_background_fraction) < 0.05);
}

TEST_CASE("modality intensities separate classes within each modality") {
    SceneConfig cfg;
    for (std::size_t u = 0; u < 2; ++u)
        for (int a = 0; a < static_cast<int>(cfg.classes); ++a)
            for (int b = a + 1; b < static_cast<int>(cfg.classes); ++b)
                CHECK(std::abs(modality_intensity(cfg, u, a) - modality_intensity(cfg, u, b)) >
                      0.2);
}

TEST_CASE("jscc_encode normalizes to the exact power contract") {
    Rng rng(5);
    Mlp enc({4, 4}, rng);
    // Raw output pairs forming [3, 4i]: real parts (3, 0), imag parts (0, 4).
    enc.weights()[0].assign(4 * 4, 0.0);
    enc.biases()[0] = {3.0, 0.0, 0.0, 4.0};
    SymbolBlock block = jscc_encode(enc, {0, 0, 0, 0}, 1.0, 2);
    double norm_sq = 0.0;
    for (const cplx& z : block.symbols) norm_sq += std::norm(z);
    CHECK(norm_sq == doctest::Approx(2.0).epsilon(1e-12));
    // sqrt(PK)/||x|| = sqrt(2)/5.
    CHECK(block.symbols[0].real() == doctest::Approx(3.0 * std::sqrt(2.0) / 5.0).epsilon(1e-12));
    CHECK(block.symbols[1].imag() == doctest::Approx(4.0 * std::sqrt(2.0) / 5.0).epsilon(1e-12));

    // Output already at norm sqrt(PK) stays put.
    enc.biases()[0] = {std::sqrt(2.0), 0.0, 0.0, 0.0};
    SymbolBlock fixed = jscc_encode(enc, {0, 0, 0, 0}, 1.0, 2);
    CHECK(fixed.symbols[0].real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    // Zero raw output has no defined scaling.
    enc.biases()[0] = {0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(jscc_encode(enc, {0, 0, 0, 0}, 1.0, 2), std::invalid_argument);
}

TEST_CASE("power contract holds over random encodes") {
    Rng rng(21);
    Mlp enc({6, 12, 20}, rng);
    const double power = 1.7;
    for (int it = 0; it < 500; ++it) {
        std::vector<double> f(6);
        for (double& v : f) v = rng.normal();
        SymbolBlock b = jscc_encode(enc, f, power, 10);
        double norm_sq = 0.0;
        for (const cplx& z : b.symbols) norm_sq += std::norm(z);
        CHECK(std::abs(norm_sq - power * 10) <= 1e-9 * power * 10);
    }
}

TEST_CASE("semantic_decode yields normalized per-cell probabilities") {
    Rng rng(3);
    Mlp dec({4, 2 * 2 * 3}, rng);
    ProbabilityMap map = semantic_decode(dec, {0.1, -0.2, 0.4, 0.9}, 2, 2, 3);
    for (std::size_t c = 0; c < 4; ++c) {
        double sum = 0.0;
        for (std::size_t g = 0; g < 3; ++g) sum += map.probs[c * 3 + g];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Uniform logits -> probability 1/G everywhere.
    for (auto& w : dec.weights()) std::fill(w.begin(), w.end(), 0.0);
    ProbabilityMap uniform = semantic_decode(dec, {0, 0, 0, 0}, 2, 2, 3);
    for (double p : uniform.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("cross entropy: uniform prediction and permutation equivariance") {
    // Uniform two-class prediction costs 2 log 2 per cell.
    ProbabilityMap pred;
    pred.height = pred.width = 2;
    pred.classes = 2;
    pred.probs.assign(8, 0.5);
    SegmentationMap truth;
    truth.height = truth.width = 2;
    truth.classes = 2;
    truth.labels = {0, 1, 1, 0};
    CHECK(cross_entropy(pred, truth) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    // Near-one-hot prediction is near zero.
    ProbabilityMap sharp = pred;
    for (std::size_t c = 0; c < 4; ++c) {
        const int t = truth.labels[c];
        sharp.probs[c * 2 + t] = 1.0;
        sharp.probs[c * 2 + (1 - t)] = 0.0;
    }
    CHECK(cross_entropy(sharp, truth) < 1e-6);

    // Simultaneous relabeling leaves the loss unchanged.
    ProbabilityMap swapped = pred;
    SegmentationMap truth_swapped = truth;
    for (std::size_t c = 0; c < 4; ++c) {
        std::swap(swapped.probs[c * 2], swapped.probs[c * 2 + 1]);
        truth_swapped.labels[c] = 1 - truth.labels[c];
    }
    CHECK(cross_entropy(swapped, truth_swapped) ==
          doctest::Approx(cross_entropy(pred, truth)).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient matches finite differences through softmax") {
    Rng rng(17);
    const std::size_t cells = 4, classes = 3;
    std::vector<double> logits(cells * classes);
    for (double& v : logits) v = rng.normal();
    SegmentationMap truth;
    truth.height = 2;
    truth.width = 2;
    truth.classes = classes;
    truth.labels = {0, 2, 1, 1};

    auto softmax_eval = [&](const std::vector<double>& z) {
        ProbabilityMap m;
        m.height = m.width = 2;
        m.classes = classes;
        m.probs.resize(z.size());
        for (std::size_t c = 0; c < cells; ++c) {
            double mx = z[c * classes];
            for (std::size_t g = 1; g < classes; ++g) mx = std::max(mx, z[c * classes + g]);
            double sum = 0.0;
            for (std::size_t g = 0; g < classes; ++g) {
                m.probs[c * classes + g] = std::exp(z[c * classes + g] - mx);
                sum += m.probs[c * classes + g];
            }
            for (std::size_t g = 0; g < classes; ++g) m.probs[c * classes + g] /= sum;
        }
        return m;
    };

    const std::vector<double> grad = cross_entropy_logit_grad(softmax_eval(logits), truth);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double h = 1e-6;
        logits[i] += h;
        const double lp = cross_entropy(softmax_eval(logits), truth);
        logits[i] -= 2 * h;
        const double lm = cross_entropy(softmax_eval(logits), truth);
        logits[i] += h;
        const double numeric = (lp - lm) / (2 * h);
        CHECK(grad[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
}

TEST_CASE("noiseless perfect-CSI run matches the stage-1 graph and is near lossless") {
    CodecConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batches_per_epoch = 4;
    tc.batch_size = 4;
    tc.rng_seed = 3;
    StageResult stage1 = train_stage1(cfg, tc);

    LinkConfig link = tiny_link();
    link.data_noise_variance = 0.0;
    link.pilot_noise_variance = 0.0;

    Rng rng(555);
    LinkDiagnostics diag =
        run_link(link, stage1.codecs, LinkMode::kPerfectCsi, nullptr, nullptr, nullptr, rng);
    CHECK(diag.symbol_mse < 1e-12);

    // Stage-1 graph on the same scene: identical symbols and prediction.
    Rng rng2(555);
    Scene scene = generate_scene(cfg.scene, rng2);
    std::vector<double> dec_in;
    for (std::size_t u = 0; u < cfg.scene.users; ++u) {
        auto f = semantic_encode(stage1.codecs.semantic_encoders[u], scene.modalities[u]);
        auto block = jscc_encode(stage1.codecs.jscc_encoders[u], f, cfg.power, cfg.symbols);
        for (auto& s : block.symbols) dec_in.push_back(s.real());
        for (auto& s : block.symbols) dec_in.push_back(s.imag());
    }
    auto fused = jscc_decode(stage1.codecs.jscc_decoder, dec_in);
    auto probs = semantic_decode(stage1.codecs.semantic_decoder, fused, cfg.scene.grid,
                                 cfg.scene.grid, cfg.scene.classes);
    CHECK(probs.argmax() == diag.predicted);
    CHECK(diag.miou_value == miou(probs.argmax(), scene.truth));
}

TEST_CASE("ablation branches share every draw before the enhancement") {
    CodecConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 1;
    tc.batches_per_epoch = 2;
    tc.batch_size = 2;
    tc.rng_seed = 8;
    StageResult stage1 = train_stage1(cfg, tc);

    LinkConfig link = tiny_link();
    link.data_noise_variance = 0.5;
    link.pilot_noise_variance = 0.5;

    Rng r1(77), r2(77);
    LinkDiagnostics no_dmce =
        run_link(link, stage1.codecs, LinkMode::kNoDmce, nullptr, nullptr, nullptr, r1);
    LinkDiagnostics perfect =
        run_link(link, stage1.codecs, LinkMode::kPerfectCsi, nullptr, nullptr, nullptr, r2);
    // Identical pre-branch draws: the pilot estimate error matches exactly.
    CHECK(no_dmce.nmse_initial_db == perfect.nmse_initial_db);
    CHECK(no_dmce.csi_truth_energy == perfect.csi_truth_energy);
    CHECK(perfect.nmse_equalizer_db == kNmseFloorDb);
    CHECK(no_dmce.nmse_equalizer_db == no_dmce.nmse_initial_db);
}

TEST_CASE("run_link validates mode prerequisites") {
    CodecConfig cfg = tiny_config();
    Rng rng(1);
    SemanticCodecs codecs = SemanticCodecs::initialize(cfg, rng);
    LinkConfig link = tiny_link();
    Rng r(2);
    CHECK_THROWS_AS(run_link(link, codecs, LinkMode::kDmce, nullptr, nullptr, nullptr, r),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_link(link, codecs, LinkMode::kYOriented, nullptr, nullptr, nullptr, r),
                    std::invalid_argument);
}

TEST_CASE("stage-1 training lowers the loss and is reproducible") {
    CodecConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 6;
    tc.batches_per_epoch = 10;
    tc.batch_size = 4;
    tc.learning_rate = 0.2;
    tc.rng_seed = 13;
    StageResult a = train_stage1(cfg, tc);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    for (double l : a.epoch_loss) CHECK(std::isfinite(l));

    StageResult b = train_stage1(cfg, tc);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.codecs.semantic_decoder == b.codecs.semantic_decoder);
    CHECK(a.codecs.jscc_decoder == b.codecs.jscc_decoder);
}

TEST_CASE("stage-3 freezes encoders and the enhancer, updates decoders") {
    CodecConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 1;
    tc.batches_per_epoch = 3;
    tc.batch_size = 2;
    tc.rng_seed = 4;
    StageResult stage1 = train_stage1(cfg, tc);

    const NoiseSchedule schedule = linear_schedule(64, 1e-4, 0.02);
    LinkConfig link = tiny_link();
    link.data_noise_variance = 0.3;
    link.pilot_noise_variance = 0.3;

    ChannelSampler sampler = [link](Rng& rng) { return build_channel(link, rng).h; };
    TrainConfig tc2 = tc;
    tc2.epochs = 2;
    PredictorArch arch;
    arch.hidden_width = 16;
    arch.hidden_layers = 1;
    arch.time_embedding_dim = 8;
    PredictorTrainResult pred = train_noise_predictor(sampler, 2, 2, schedule, tc2, arch);

    TrainConfig tc3 = tc;
    tc3.epochs = 2;
    StageResult stage3 = train_stage3(stage1.codecs, pred.predictor, schedule, link, tc3);

    for (std::size_t u = 0; u < cfg.scene.users; ++u) {
        CHECK(stage3.codecs.semantic_encoders[u] == stage1.codecs.semantic_encoders[u]);
        CHECK(stage3.codecs.jscc_encoders[u] == stage1.codecs.jscc_encoders[u]);
    }
    CHECK(stage3.codecs.semantic_decoder != stage1.codecs.semantic_decoder);
    CHECK(stage3.codecs.jscc_decoder != stage1.codecs.jscc_decoder);
    for (double l : stage3.epoch_loss) CHECK(std::isfinite(l));

    StageResult again = train_stage3(stage1.codecs, pred.predictor, schedule, link, tc3);
    CHECK(again.codecs.semantic_decoder == stage3.codecs.semantic_decoder);
}

TEST_CASE("y-oriented sampler produces HX with the right shape and power") {
    CodecConfig cfg = tiny_config();
    Rng rng(31);
    SemanticCodecs codecs = SemanticCodecs::initialize(cfg, rng);
    LinkConfig link = tiny_link();
    ChannelSampler sampler = make_y_sampler(codecs, link);
    Rng draw(5);
    ComplexMatrix y = sampler(draw);
    CHECK(y.rows() == link.rx_antennas);
    CHECK(y.cols() == link.block_length);
    CHECK(y.all_finite());
}

TEST_CASE("y-oriented mode runs end to end with a trained denoiser") {
    CodecConfig cfg = tiny_config();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batches_per_epoch = 4;
    tc.batch_size = 2;
    tc.rng_seed = 6;
    StageResult stage1 = train_stage1(cfg, tc);

    LinkConfig link = tiny_link();
    link.data_noise_variance = 0.5;
    link.pilot_noise_variance = 0.5;

    const NoiseSchedule schedule = linear_schedule(64, 1e-4, 0.02);
    PredictorArch arch;
    arch.hidden_width = 16;
    arch.hidden_layers = 1;
    arch.time_embedding_dim = 8;
    TrainConfig tcy = tc;
    PredictorTrainResult y_pred = train_noise_predictor(
        make_y_sampler(stage1.codecs, link), link.rx_antennas, link.block_length, schedule, tcy,
        arch);

    Rng rng(90);
    LinkDiagnostics diag = run_link(link, stage1.codecs, LinkMode::kYOriented, nullptr,
                                    &y_pred.predictor, &schedule, rng);
    CHECK(std::isfinite(diag.symbol_mse));
    CHECK(diag.miou_value >= 0.0);
    CHECK(diag.miou_value <= 1.0);
    // Y denoising leaves the CSI untouched: the equalizer used the estimate.
    CHECK(diag.nmse_equalizer_db == diag.nmse_initial_db);
}
