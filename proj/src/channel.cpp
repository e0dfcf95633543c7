#include "dmce/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace dmce {

namespace {
constexpr double kMaxDelaySeconds = 1e-6;
}

void LinkConfig::validate() const {
    if (users < 1) throw std::invalid_argument("LinkConfig: users must be >= 1");
    if (rx_antennas < users)
        throw std::invalid_argument("LinkConfig: rx_antennas must be >= users for ZF");
    if (block_length < 1) throw std::invalid_argument("LinkConfig: block_length must be >= 1");
    if (!(power > 0.0)) throw std::invalid_argument("LinkConfig: power must be positive");
    if (data_noise_variance < 0.0 || pilot_noise_variance < 0.0)
        throw std::invalid_argument("LinkConfig: noise variances must be nonnegative");
    if (path_count < 1) throw std::invalid_argument("LinkConfig: path_count must be >= 1");
    if (!(carrier_frequency_hz > 0.0))
        throw std::invalid_argument("LinkConfig: carrier frequency must be positive");
    if (codebook_jitter < 0.0)
        throw std::invalid_argument("LinkConfig: codebook_jitter must be nonnegative");
}

PathSet sample_paths(const LinkConfig& cfg, Rng& rng) {
    PathSet p;
    p.carrier_frequency_hz = cfg.carrier_frequency_hz;
    p.paths.reserve(cfg.path_count);
    const double per_path_var = 1.0 / static_cast<double>(cfg.path_count);
    for (std::size_t l = 0; l < cfg.path_count; ++l) {
        Path path;
        path.gain = rng.complex_normal(per_path_var);
        path.delay_s = rng.uniform(0.0, kMaxDelaySeconds);
        p.paths.push_back(path);
    }
    return p;
}

cplx link_response(const PathSet& p) {
    cplx sum{0.0, 0.0};
    for (const Path& path : p.paths) {
        const double phase = -2.0 * M_PI * path.delay_s * p.carrier_frequency_hz;
        sum += path.gain * cplx{std::cos(phase), std::sin(phase)};
    }
    return sum * (p.rx_gain * p.tx_gain);
}

std::vector<ComplexMatrix> codebook_channel_set(std::size_t m, std::size_t n) {
    // Base pattern: first n columns of the m-point DFT matrix, so every
    // codeword is sqrt(m) times a matrix with orthonormal columns.
    ComplexMatrix base(m, n);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = 2.0 * M_PI * static_cast<double>(j * i) / static_cast<double>(m);
            base(j, i) = cplx{std::cos(ph), std::sin(ph)};
        }

    // Row phases from the m-point DFT and column phases from the n-point DFT
    // make the m*n codewords mutually Frobenius-orthogonal.
    std::vector<ComplexMatrix> set;
    set.reserve(m * n);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            ComplexMatrix c(m, n);
            for (std::size_t j = 0; j < m; ++j) {
                const double rp = 2.0 * M_PI * static_cast<double>(k * j) / static_cast<double>(m);
                const cplx row_phase{std::cos(rp), std::sin(rp)};
                for (std::size_t i = 0; i < n; ++i) {
                    const double cp =
                        2.0 * M_PI * static_cast<double>(l * i) / static_cast<double>(n);
                    c(j, i) = base(j, i) * row_phase * cplx{std::cos(cp), std::sin(cp)};
                }
            }
            set.push_back(std::move(c));
        }
    }
    return set;
}

std::vector<ComplexMatrix> codebook_codewords(std::size_t m, std::size_t n, std::size_t size) {
    if (size < 1) throw std::invalid_argument("codebook_codewords: size must be >= 1");
    const auto base = codebook_channel_set(m, n);
    std::vector<ComplexMatrix> words;
    const std::size_t count = std::min(size, 2 * base.size());
    words.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const ComplexMatrix& p = base[i / 2];
        words.push_back(i % 2 == 0 ? p : cplx{-1.0, 0.0} * p);
    }
    return words;
}

namespace {

PathSet single_path_set(cplx gain, double carrier_frequency_hz) {
    PathSet p;
    p.carrier_frequency_hz = carrier_frequency_hz;
    p.paths.push_back(Path{gain, 0.0});
    return p;
}

}  // namespace

ChannelRealization build_channel(const LinkConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t m = cfg.rx_antennas;
    const std::size_t n = cfg.users;

    ChannelRealization r;
    r.h = ComplexMatrix(m, n);
    r.path_sets.assign(m, std::vector<PathSet>(n));

    switch (cfg.model) {
        case ChannelModel::kRayTracing:
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t i = 0; i < n; ++i) {
                    r.path_sets[j][i] = sample_paths(cfg, rng);
                    r.h(j, i) = link_response(r.path_sets[j][i]);
                }
            break;
        case ChannelModel::kRayleigh:
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t i = 0; i < n; ++i) {
                    r.h(j, i) = rng.complex_normal(1.0);
                    r.path_sets[j][i] = single_path_set(r.h(j, i), cfg.carrier_frequency_hz);
                }
            break;
        case ChannelModel::kCodebook: {
            const auto set = codebook_codewords(m, n, cfg.codebook_size);
            const std::size_t pick = static_cast<std::size_t>(rng.uniform_index(set.size()));
            const double xi = cfg.codebook_jitter;
            // Normalize so the average entry power stays exactly 1.
            const double scale = 1.0 / std::sqrt(1.0 + xi * xi);
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx jitter = rng.complex_normal(xi * xi);
                    r.h(j, i) = scale * (set[pick](j, i) + jitter);
                    r.path_sets[j][i] = single_path_set(r.h(j, i), cfg.carrier_frequency_hz);
                }
            break;
        }
    }
    return r;
}

ComplexMatrix transmit(const ComplexMatrix& h, const ComplexMatrix& x, double noise_variance,
                       Rng& rng) {
    if (noise_variance < 0.0) throw std::invalid_argument("transmit: negative noise variance");
    ComplexMatrix y = matmul(h, x);
    if (noise_variance > 0.0) {
        for (cplx& v : y.data()) v += rng.complex_normal(noise_variance);
    }
    return y;
}

CsiEstimate estimate_csi(const ChannelRealization& truth, double pilot_noise_variance, Rng& rng) {
    if (pilot_noise_variance < 0.0)
        throw std::invalid_argument("estimate_csi: negative noise variance");
    CsiEstimate est;
    est.h_hat = truth.h;
    est.noise_variance = pilot_noise_variance;
    if (pilot_noise_variance > 0.0) {
        for (cplx& v : est.h_hat.data()) v += rng.complex_normal(pilot_noise_variance);
    }
    return est;
}

}  // namespace dmce
