#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmce/metrics.hpp"
#include "dmce/rng.hpp"

using namespace dmce;

namespace {

SegmentationMap make_map(std::size_t side, std::size_t classes, std::vector<int> labels) {
    SegmentationMap m;
    m.height = m.width = side;
    m.classes = classes;
    m.labels = std::move(labels);
    return m;
}

SegmentationMap random_map(std::size_t side, std::size_t classes, Rng& rng) {
    SegmentationMap m;
    m.height = m.width = side;
    m.classes = classes;
    m.labels.resize(side * side);
    for (int& v : m.labels) v = static_cast<int>(rng.uniform_index(classes));
    return m;
}

// Independent oracle: per-class set intersection over union.
double miou_oracle(const SegmentationMap& pred, const SegmentationMap& truth) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t g = 0; g < truth.classes; ++g) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < truth.cells(); ++i) {
            const bool in_p = pred.labels[i] == static_cast<int>(g);
            const bool in_t = truth.labels[i] == static_cast<int>(g);
            inter += (in_p && in_t) ? 1 : 0;
            uni += (in_p || in_t) ? 1 : 0;
        }
        if (uni == 0) continue;
        sum += static_cast<double>(inter) / static_cast<double>(uni);
        ++used;
    }
    return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

}  // namespace

TEST_CASE("nmse_db hand cases") {
    ComplexMatrix truth = ComplexMatrix::identity(2);
    CHECK(nmse_db(truth, truth) == kNmseFloorDb);

    ComplexMatrix est = ComplexMatrix::identity(2);
    est(0, 0) = cplx{1.1, 0.0};
    est(1, 1) = cplx{0.9, 0.0};
    CHECK(nmse_db(est, truth) == doctest::Approx(-20.0).epsilon(1e-12));

    ComplexMatrix doubled = cplx{2.0, 0.0} * truth;
    CHECK(nmse_db(doubled, truth) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nmse_db rejects bad input") {
    ComplexMatrix a(2, 2), b(2, 3);
    CHECK_THROWS_AS(nmse_db(a, b), std::invalid_argument);
    CHECK_THROWS_AS(nmse_db(a, ComplexMatrix(2, 2)), std::invalid_argument);  // zero norm
}

TEST_CASE("nmse_db is invariant under a simultaneous unitary rotation") {
    Rng rng(5);
    ComplexMatrix truth(2, 3), est(2, 3);
    for (cplx& z : truth.data()) z = cplx{rng.normal(), rng.normal()};
    for (cplx& z : est.data()) z = cplx{rng.normal(), rng.normal()};
    // Unitary 2x2 from a Givens-style construction.
    const double c = std::cos(0.7), s = std::sin(0.7);
    ComplexMatrix u(2, 2, {cplx{c, 0}, cplx{-s, 0}, cplx{s, 0}, cplx{c, 0}});
    const double before = nmse_db(est, truth);
    const double after = nmse_db(matmul(u, est), matmul(u, truth));
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("miou trivial and balanced-degenerate cases") {
    Rng rng(3);
    SegmentationMap truth = random_map(8, 3, rng);
    CHECK(miou(truth, truth) == 1.0);

    // Two balanced classes, prediction collapses to class 0:
    // IoU_0 = 0.5, IoU_1 = 0 -> mean 0.25.
    std::vector<int> half(64, 0);
    for (std::size_t i = 32; i < 64; ++i) half[i] = 1;
    SegmentationMap t2 = make_map(8, 2, half);
    SegmentationMap p2 = make_map(8, 2, std::vector<int>(64, 0));
    CHECK(miou(p2, t2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("miou equals the set-intersection oracle exactly") {
    Rng rng(123);
    for (int it = 0; it < 120; ++it) {
        const std::size_t classes = 2 + rng.uniform_index(4);
        const std::size_t side = 2 + rng.uniform_index(7);
        SegmentationMap truth = random_map(side, classes, rng);
        SegmentationMap pred = random_map(side, classes, rng);
        CHECK(miou(pred, truth) == miou_oracle(pred, truth));
    }
}

TEST_CASE("miou is invariant under simultaneous relabeling") {
    Rng rng(9);
    SegmentationMap truth = random_map(6, 4, rng);
    SegmentationMap pred = random_map(6, 4, rng);
    const double base = miou(pred, truth);
    const int perm[4] = {2, 0, 3, 1};
    SegmentationMap truth_p = truth, pred_p = pred;
    for (std::size_t i = 0; i < truth.cells(); ++i) {
        truth_p.labels[i] = perm[truth.labels[i]];
        pred_p.labels[i] = perm[pred.labels[i]];
    }
    CHECK(miou(pred_p, truth_p) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("empty-class policy") {
    // Class 2 appears in neither map.
    SegmentationMap truth = make_map(2, 3, {0, 0, 1, 1});
    SegmentationMap pred = make_map(2, 3, {0, 1, 1, 1});
    // IoU_0 = 1/2, IoU_1 = 2/3.
    const double present = (0.5 + 2.0 / 3.0);
    CHECK(miou(pred, truth) == doctest::Approx(present / 2.0));
    CHECK(miou(pred, truth, EmptyClassPolicy::kScoreOne) ==
          doctest::Approx((present + 1.0) / 3.0));
    CHECK(miou(pred, truth, EmptyClassPolicy::kScoreZero) == doctest::Approx(present / 3.0));
}

TEST_CASE("confusion matrix row sums count true-class cells") {
    Rng rng(11);
    SegmentationMap truth = random_map(5, 3, rng);
    SegmentationMap pred = random_map(5, 3, rng);
    const ConfusionMatrix cm = confusion_matrix(pred, truth);
    CHECK(cm.total() == 25);
    for (std::size_t g = 0; g < 3; ++g) {
        long long row = 0;
        for (std::size_t o = 0; o < 3; ++o) row += cm.count(g, o);
        long long expect = 0;
        for (int v : truth.labels) expect += (v == static_cast<int>(g)) ? 1 : 0;
        CHECK(row == expect);
    }
}

TEST_CASE("snr conversion") {
    CHECK(snr_db_to_noise_variance(0.0, 1.0) == doctest::Approx(1.0));
    CHECK(snr_db_to_noise_variance(10.0, 1.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(snr_db_to_noise_variance(20.0, 2.0) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK_THROWS_AS(snr_db_to_noise_variance(0.0, 0.0), std::invalid_argument);
}
