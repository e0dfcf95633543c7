#include "dmce/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dmce {

long long ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), 0LL);
}

ConfusionMatrix confusion_matrix(const SegmentationMap& pred, const SegmentationMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width ||
        pred.classes != truth.classes)
        throw std::invalid_argument("confusion_matrix: map shape or class count mismatch");
    ConfusionMatrix cm(truth.classes);
    for (std::size_t i = 0; i < truth.cells(); ++i) cm.add(truth.labels[i], pred.labels[i]);
    return cm;
}

double miou(const SegmentationMap& pred, const SegmentationMap& truth, EmptyClassPolicy policy) {
    const ConfusionMatrix cm = confusion_matrix(pred, truth);
    const std::size_t g_count = cm.classes();
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t g = 0; g < g_count; ++g) {
        long long tp = cm.count(g, g);
        long long fn = 0, fp = 0;
        for (std::size_t o = 0; o < g_count; ++o) {
            if (o == g) continue;
            fn += cm.count(g, o);
            fp += cm.count(o, g);
        }
        const long long denom = tp + fp + fn;
        if (denom == 0) {
            switch (policy) {
                case EmptyClassPolicy::kExclude: continue;
                case EmptyClassPolicy::kScoreOne: sum += 1.0; break;
                case EmptyClassPolicy::kScoreZero: break;
            }
            ++used;
            continue;
        }
        sum += static_cast<double>(tp) / static_cast<double>(denom);
        ++used;
    }
    return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

double nmse_db(const ComplexMatrix& estimate, const ComplexMatrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("nmse_db: shape mismatch");
    const double ref = frobenius_norm_sq(truth);
    if (!(ref > 0.0)) throw std::invalid_argument("nmse_db: zero-norm reference");
    const double err = frobenius_norm_sq(estimate - truth);
    if (err == 0.0) return kNmseFloorDb;
    const double db = 10.0 * std::log10(err / ref);
    return db < kNmseFloorDb ? kNmseFloorDb : db;
}

double snr_db_to_noise_variance(double snr_db, double power) {
    if (!(power > 0.0)) throw std::invalid_argument("snr_db_to_noise_variance: power must be > 0");
    return power / std::pow(10.0, snr_db / 10.0);
}

}  // namespace dmce
