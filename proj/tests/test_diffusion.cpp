#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmce/diffusion.hpp"
#include "dmce/noise_predictor.hpp"
#include "dmce/rng.hpp"

using namespace dmce;

namespace {

NoiseSchedule paper_schedule() { return linear_schedule(1000, 1e-4, 0.02); }

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("linear schedule endpoints and interior value") {
    NoiseSchedule s = paper_schedule();
    CHECK(s.steps() == 1000);
    CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(s.beta(500) == doctest::Approx(1e-4 + 499.0 * (0.02 - 1e-4) / 999.0).epsilon(1e-12));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("linear schedule rejects bad parameters") {
    CHECK_THROWS_AS(linear_schedule(1, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 0.03, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("alpha_bar decreases and the noise ratio increases strictly") {
    NoiseSchedule s = paper_schedule();
    for (std::size_t t = 2; t <= s.steps(); ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.noise_to_signal(t) > s.noise_to_signal(t - 1));
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) < 1.0);
        // The cumulative product identity holds exactly as computed.
        CHECK(s.alpha_bar(t) == s.alpha_bar(t - 1) * s.alpha(t));
    }
}

TEST_CASE("q_sample limiting cases and exact inversion") {
    NoiseSchedule s = paper_schedule();
    Rng rng(5);
    const std::size_t n = 8;
    const std::vector<double> zeros(n, 0.0);

    for (std::size_t t : {std::size_t{1}, std::size_t{137}, std::size_t{1000}}) {
        std::vector<double> x0 = random_vec(n, rng);
        std::vector<double> eps = random_vec(n, rng);

        std::vector<double> no_noise = q_sample(x0, t, zeros, s);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(no_noise[i] == doctest::Approx(std::sqrt(s.alpha_bar(t)) * x0[i]).epsilon(1e-14));

        std::vector<double> no_signal = q_sample(zeros, t, eps, s);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(no_signal[i] ==
                  doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t)) * eps[i]).epsilon(1e-14));

        // Algebraic inversion with the true noise reproduces x0.
        std::vector<double> x_t = q_sample(x0, t, eps, s);
        for (std::size_t i = 0; i < n; ++i) {
            const double rec =
                (x_t[i] - std::sqrt(1.0 - s.alpha_bar(t)) * eps[i]) / std::sqrt(s.alpha_bar(t));
            CHECK(std::abs(rec - x0[i]) < 1e-12);
        }
    }
}

TEST_CASE("q_sample validates lengths and range") {
    NoiseSchedule s = paper_schedule();
    std::vector<double> a(4, 0.0), b(5, 0.0);
    CHECK_THROWS_AS(q_sample(a, 1, b, s), std::invalid_argument);
    CHECK_THROWS_AS(q_sample(a, 0, a, s), std::invalid_argument);
    CHECK_THROWS_AS(q_sample(a, 1001, a, s), std::invalid_argument);
}

TEST_CASE("select_entry_step matches the exhaustive scan") {
    NoiseSchedule s = paper_schedule();
    CHECK(select_entry_step(0.0, s) == 1);
    CHECK(select_entry_step(s.noise_to_signal(1000) * 2.0, s) == 1000);

    Rng rng(17);
    auto brute = [&](double sigma_sq) {
        std::size_t best = 1;
        double best_d = std::abs(sigma_sq - s.noise_to_signal(1));
        for (std::size_t t = 2; t <= s.steps(); ++t) {
            const double d = std::abs(sigma_sq - s.noise_to_signal(t));
            if (d < best_d) {
                best_d = d;
                best = t;
            }
        }
        return best;
    };
    CHECK(select_entry_step(0.01, s) == brute(0.01));
    for (int it = 0; it < 200; ++it) {
        const double sigma_sq = std::pow(10.0, rng.uniform(-5.0, 1.5));
        CHECK(select_entry_step(sigma_sq, s) == brute(sigma_sq));
    }
    // Exact tie between steps t and t+1 resolves to the smaller step.
    const double tie = 0.5 * (s.noise_to_signal(400) + s.noise_to_signal(401));
    CHECK(select_entry_step(tie, s) == 400);
}

TEST_CASE("select_entry_step is monotone in the noise level") {
    NoiseSchedule s = paper_schedule();
    std::size_t prev = 1;
    for (double sigma_sq = 0.0; sigma_sq < 2.0; sigma_sq += 0.01) {
        const std::size_t t = select_entry_step(sigma_sq, s);
        CHECK(t >= prev);
        prev = t;
    }
}

TEST_CASE("reverse_step inverts the final forward step exactly") {
    NoiseSchedule s = paper_schedule();
    Rng rng(3);
    std::vector<double> x0 = random_vec(10, rng);
    std::vector<double> eps = random_vec(10, rng);
    std::vector<double> x1 = q_sample(x0, 1, eps, s);
    std::vector<double> rec = reverse_step(x1, 1, eps, s, rng);
    for (std::size_t i = 0; i < x0.size(); ++i) CHECK(std::abs(rec[i] - x0[i]) < 1e-10);
}

TEST_CASE("reverse_step with zero predicted noise rescales on average") {
    NoiseSchedule s = paper_schedule();
    const std::size_t t = 600;
    std::vector<double> x_t(6, 1.0);
    const std::vector<double> zeros(6, 0.0);
    // Average over many draws: the injected noise is zero-mean.
    std::vector<double> mean(6, 0.0);
    Rng rng(21);
    const int trials = 200000;
    for (int it = 0; it < trials; ++it) {
        std::vector<double> out = reverse_step(x_t, t, zeros, s, rng);
        for (std::size_t i = 0; i < 6; ++i) mean[i] += out[i];
    }
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(mean[i] / trials == doctest::Approx(1.0 / std::sqrt(s.alpha(t))).epsilon(0.005));
}

TEST_CASE("reverse_step is deterministic under a fixed seed") {
    NoiseSchedule s = paper_schedule();
    Rng r1(12), r2(12);
    std::vector<double> x(8, 0.3), e(8, -0.1);
    CHECK(reverse_step(x, 500, e, s, r1) == reverse_step(x, 500, e, s, r2));
}

TEST_CASE("oracle-predictor chain reconstructs x0 from any entry step <= 50") {
    NoiseSchedule s = paper_schedule();
    Rng rng(2718);
    for (std::size_t t_entry : {std::size_t{1}, std::size_t{7}, std::size_t{25}, std::size_t{50}}) {
        std::vector<double> x0 = random_vec(8, rng);
        std::vector<double> eps = random_vec(8, rng);
        std::vector<double> x = q_sample(x0, t_entry, eps, s);
        for (std::size_t t = t_entry; t >= 1; --t) {
            // Oracle: the exact noise currently contained in x_t.
            const double a = std::sqrt(s.alpha_bar(t));
            const double b = std::sqrt(1.0 - s.alpha_bar(t));
            std::vector<double> true_eps(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) true_eps[i] = (x[i] - a * x0[i]) / b;
            x = reverse_step(x, t, true_eps, s, rng);
        }
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - x0[i]) < 1e-8);
    }
}

TEST_CASE("denoise chain with a zero predictor matches a hand-rolled trace") {
    NoiseSchedule s = paper_schedule();
    Rng rng(4);
    // Zero-weight network predicts zero noise everywhere.
    std::vector<std::size_t> dims{8 + 16, 4, 8};
    Rng init(1);
    Mlp zero_net(dims, init);
    for (auto& w : zero_net.weights()) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : zero_net.biases()) std::fill(b.begin(), b.end(), 0.0);
    NoisePredictor zero_pred(zero_net, 16, 1.0);

    ComplexMatrix h_hat(2, 2, {cplx{0.4, -0.2}, cplx{1.0, 0.1}, cplx{-0.3, 0.8}, cplx{0.2, 0.0}});
    const double sigma_h_sq = 0.05;

    Rng chain_rng(900);
    ComplexMatrix enhanced = denoise_matrix(zero_pred, h_hat, sigma_h_sq, s, chain_rng);

    // Oracle trace with an independent generator consuming the same stream.
    Rng trace_rng(900);
    const std::size_t t_entry = select_entry_step(sigma_h_sq, s);
    std::vector<double> x = h_hat.to_real_vector();
    for (double& v : x) v *= std::sqrt(s.alpha_bar(t_entry));
    for (std::size_t t = t_entry; t >= 1; --t) {
        for (double& v : x) v /= std::sqrt(s.alpha(t));
        if (t > 1) {
            const double bt = s.beta(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
            for (double& v : x) v += std::sqrt(bt) * M_SQRT1_2 * trace_rng.normal();
        }
    }
    ComplexMatrix expected = ComplexMatrix::from_real_vector(x, 2, 2);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(enhanced.data()[i] - expected.data()[i]) < 1e-12);
}

TEST_CASE("denoise_matrix rejects dimension mismatches") {
    NoiseSchedule s = paper_schedule();
    Rng init(1), rng(2);
    Mlp net({8 + 16, 4, 8}, init);
    NoisePredictor pred(net, 16, 1.0);
    ComplexMatrix wrong(3, 2);
    CHECK_THROWS_AS(denoise_matrix(pred, wrong, 0.1, s, rng), std::invalid_argument);
}
