#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dmce/mlp.hpp"
#include "dmce/noise_predictor.hpp"

namespace dmce {

/// Binary checkpoint layout (all integers little-endian uint32, all
/// parameters little-endian IEEE-754 doubles):
///
/// Noise predictor file:
///   magic "DMCE1"
///   layer-dim count, then the layer dims
///   per layer: weights row-major, then biases
///   train signal power (double), time embedding dim (uint32)
///
/// Network bundle file (codecs):
///   magic "DMCE1"
///   section count, then per section: name length, name bytes, and an
///   Mlp blob (dim count, dims, per-layer weights then biases).
void save_predictor(const std::string& path, const NoisePredictor& predictor);
NoisePredictor load_predictor(const std::string& path);

using NamedMlp = std::pair<std::string, Mlp>;

void save_mlp_bundle(const std::string& path, const std::vector<NamedMlp>& nets);
std::vector<NamedMlp> load_mlp_bundle(const std::string& path);

}  // namespace dmce
