#include "dmce/scene.hpp"

#include <stdexcept>

namespace dmce {

void SceneConfig::validate() const {
    if (grid < 2) throw std::invalid_argument("SceneConfig: grid must be >= 2");
    if (classes < 2) throw std::invalid_argument("SceneConfig: classes must be >= 2");
    if (users < 1) throw std::invalid_argument("SceneConfig: users must be >= 1");
    if (min_rect < 1 || max_rect < min_rect || max_rect > grid)
        throw std::invalid_argument("SceneConfig: rectangle bounds invalid");
    if (pixel_noise < 0.0) throw std::invalid_argument("SceneConfig: pixel_noise must be >= 0");
}

double modality_intensity(const SceneConfig& cfg, std::size_t modality, int cls) {
    // Evenly spaced levels in [0.05, 0.95], visited in a modality-specific
    // order: identity for modality 0, reversed-about-background for odd
    // modalities, so the same class looks different to different sources.
    const std::size_t g_count = cfg.classes;
    std::size_t idx = static_cast<std::size_t>(cls);
    if (modality % 2 == 1 && idx != 0) idx = g_count - idx;
    const double step = g_count > 1 ? 0.9 / static_cast<double>(g_count - 1) : 0.0;
    return 0.05 + step * static_cast<double>(idx);
}

namespace {

struct Rect {
    std::size_t row, col, height, width;
    int cls;
};

void paint(SegmentationMap& map, const std::vector<Rect>& rects, std::size_t skip) {
    std::fill(map.labels.begin(), map.labels.end(), 0);
    for (std::size_t r = 0; r < rects.size(); ++r) {
        if (r == skip) continue;
        const Rect& rect = rects[r];
        for (std::size_t i = rect.row; i < rect.row + rect.height; ++i)
            for (std::size_t j = rect.col; j < rect.col + rect.width; ++j)
                map.at(i, j) = rect.cls;
    }
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, Rng& rng) {
    cfg.validate();

    std::vector<Rect> rects(cfg.rectangles);
    for (Rect& r : rects) {
        r.height = cfg.min_rect + rng.uniform_index(cfg.max_rect - cfg.min_rect + 1);
        r.width = cfg.min_rect + rng.uniform_index(cfg.max_rect - cfg.min_rect + 1);
        r.row = rng.uniform_index(cfg.grid - r.height + 1);
        r.col = rng.uniform_index(cfg.grid - r.width + 1);
        r.cls = 1 + static_cast<int>(rng.uniform_index(cfg.classes - 1));
    }

    Scene scene;
    scene.truth.height = scene.truth.width = cfg.grid;
    scene.truth.classes = cfg.classes;
    scene.truth.labels.assign(cfg.cells(), 0);
    paint(scene.truth, rects, rects.size());

    scene.modalities.resize(cfg.users);
    SegmentationMap view = scene.truth;
    for (std::size_t u = 0; u < cfg.users; ++u) {
        std::size_t skip = rects.size();  // modality 0 sees everything
        if (u > 0 && !rects.empty()) skip = rng.uniform_index(rects.size());
        paint(view, rects, skip);
        std::vector<double>& img = scene.modalities[u];
        img.resize(cfg.cells());
        for (std::size_t i = 0; i < cfg.cells(); ++i)
            img[i] = modality_intensity(cfg, u, view.labels[i]) + cfg.pixel_noise * rng.normal();
    }
    return scene;
}

}  // namespace dmce
