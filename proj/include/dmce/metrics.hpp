#pragma once

#include <cstddef>
#include <vector>

#include "dmce/complex_matrix.hpp"

namespace dmce {

/// Class-label grid, row-major, labels in [0, classes).
struct SegmentationMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t classes = 0;
    std::vector<int> labels;  // height * width

    int at(std::size_t r, std::size_t c) const { return labels[r * width + c]; }
    int& at(std::size_t r, std::size_t c) { return labels[r * width + c]; }
    std::size_t cells() const { return height * width; }

    bool operator==(const SegmentationMap& other) const = default;
};

/// counts(i, j) = cells with true class i predicted as class j.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes)
        : classes_(classes), counts_(classes * classes, 0) {}

    void add(int true_class, int predicted_class) {
        ++counts_[static_cast<std::size_t>(true_class) * classes_ +
                  static_cast<std::size_t>(predicted_class)];
    }
    std::size_t classes() const { return classes_; }
    long long count(std::size_t true_class, std::size_t predicted_class) const {
        return counts_[true_class * classes_ + predicted_class];
    }
    long long total() const;

private:
    std::size_t classes_;
    std::vector<long long> counts_;
};

ConfusionMatrix confusion_matrix(const SegmentationMap& pred, const SegmentationMap& truth);

/// How classes absent from both maps enter the mIoU mean.
enum class EmptyClassPolicy { kExclude, kScoreOne, kScoreZero };

/// Mean intersection-over-union: per class TP / (TP + FP + FN), averaged.
/// Classes with no presence in either map follow the policy (default:
/// excluded from the mean).
double miou(const SegmentationMap& pred, const SegmentationMap& truth,
            EmptyClassPolicy policy = EmptyClassPolicy::kExclude);

/// 10 log10(||estimate - truth||_F^2 / ||truth||_F^2), floored at -300 dB.
double nmse_db(const ComplexMatrix& estimate, const ComplexMatrix& truth);

constexpr double kNmseFloorDb = -300.0;

/// sigma^2 = P / 10^(snr_db / 10).
double snr_db_to_noise_variance(double snr_db, double power);

}  // namespace dmce
