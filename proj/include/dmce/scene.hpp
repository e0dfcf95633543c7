#pragma once

#include <cstddef>
#include <vector>

#include "dmce/metrics.hpp"
#include "dmce/rng.hpp"

namespace dmce {

/// Synthetic multi-source scene generator: a class-label grid built from
/// random rectangles over a background class, rendered into one image per
/// user through modality-specific intensity tables. Every modality after
/// the first drops one rectangle, so no single source sees the whole scene.
struct SceneConfig {
    std::size_t grid = 16;        // square label grid
    std::size_t classes = 4;      // G, class 0 is background
    std::size_t users = 2;        // modality count
    std::size_t rectangles = 2;
    std::size_t min_rect = 4;     // rectangle side bounds, inclusive
    std::size_t max_rect = 8;
    double pixel_noise = 0.08;    // stddev of additive rendering noise
    /// Long-run mean background pixel fraction of the generator under the
    /// defaults above; checked by a Monte-Carlo test.
    double expected_background_fraction = 0.747;

    void validate() const;
    std::size_t cells() const { return grid * grid; }
};

struct Scene {
    SegmentationMap truth;
    std::vector<std::vector<double>> modalities;  // users x cells
};

/// Intensity assigned to a class by a modality. Distinct classes get
/// distinct levels within each modality, and the class ordering differs
/// across modalities.
double modality_intensity(const SceneConfig& cfg, std::size_t modality, int cls);

Scene generate_scene(const SceneConfig& cfg, Rng& rng);

}  // namespace dmce
