#pragma once

#include <cstdint>
#include <vector>

#include "dmce/complex_matrix.hpp"
#include "dmce/rng.hpp"

namespace dmce {

/// One multipath propagation path: complex gain and delay in seconds.
struct Path {
    cplx gain;
    double delay_s = 0.0;
};

/// Multipath description of a single transmitter/antenna link.
struct PathSet {
    std::vector<Path> paths;
    double carrier_frequency_hz = 3.5e9;
    double rx_gain = 1.0;
    double tx_gain = 1.0;
};

/// How build_channel draws the channel matrix.
///  - kRayTracing: each entry is the beam-aligned multipath response of an
///    independently drawn PathSet (L paths, unit average link power).
///  - kRayleigh: entries i.i.d. CN(0,1) directly.
///  - kCodebook: entries drawn near a small set of canonical unit-modulus
///    phase patterns (the effective channels left after beam alignment with
///    a finite beam codebook) plus complex Gaussian jitter. Strongly
///    structured, full rank, unit average entry power.
enum class ChannelModel { kRayTracing, kRayleigh, kCodebook };

struct LinkConfig {
    std::size_t users = 2;          // N, single-antenna transmitters
    std::size_t rx_antennas = 2;    // M, must be >= users for ZF
    std::size_t block_length = 128; // K, complex symbols per user
    double power = 1.0;             // P, per-user transmit power
    double data_noise_variance = 1.0;   // sigma^2 per complex entry of Z
    double pilot_noise_variance = 1.0;  // sigma_H^2 per complex entry of Z_H
    std::size_t path_count = 4;     // L, paths per link (ray tracing)
    std::uint64_t rng_seed = 0;

    ChannelModel model = ChannelModel::kRayTracing;
    double carrier_frequency_hz = 3.5e9;
    double codebook_jitter = 0.1;   // xi, jitter scale of the codebook model
    std::size_t codebook_size = 2;  // number of canonical patterns drawn from

    void validate() const;  // throws std::invalid_argument
};

/// True channel with the path sets that produced it.
struct ChannelRealization {
    ComplexMatrix h;  // M x N
    std::vector<std::vector<PathSet>> path_sets;  // [M][N]
};

/// Pilot-based observation of a channel.
struct CsiEstimate {
    ComplexMatrix h_hat;     // M x N
    double noise_variance = 0.0;  // sigma_H^2 per complex entry
};

/// Draw one link's multipath set: L gains i.i.d. CN(0, 1/L) so the average
/// link power is 1, delays uniform on [0, 1us], unit beam gains.
PathSet sample_paths(const LinkConfig& cfg, Rng& rng);

/// Beam-aligned frequency response: sum_l gain_l * exp(-j 2 pi tau_l f) * Grx * Gtx.
cplx link_response(const PathSet& p);

/// The canonical matrices of the codebook model: M*N mutually
/// Frobenius-orthogonal unit-modulus patterns, each a condition-1 scaled
/// unitary (phase-diagonal * DFT submatrix * phase-diagonal).
std::vector<ComplexMatrix> codebook_channel_set(std::size_t m, std::size_t n);

/// Codeword enumeration used by the kCodebook model: the orthogonal
/// patterns interleaved with their negatives, [P0, -P0, P1, -P1, ...], so
/// a size-2 codebook is a maximally separated antipodal pair. size is
/// clamped to 2*M*N.
std::vector<ComplexMatrix> codebook_codewords(std::size_t m, std::size_t n, std::size_t size);

/// Draw a channel matrix under cfg.model. Entry (j,i) of the ray-tracing
/// matrix is the response of an independent PathSet for user i, antenna j.
ChannelRealization build_channel(const LinkConfig& cfg, Rng& rng);

/// Y = H X + Z with Z i.i.d. CN(0, noise_variance) per entry.
ComplexMatrix transmit(const ComplexMatrix& h, const ComplexMatrix& x, double noise_variance,
                       Rng& rng);

/// Pilot estimate H + Z_H with Z_H i.i.d. CN(0, pilot_noise_variance).
CsiEstimate estimate_csi(const ChannelRealization& truth, double pilot_noise_variance, Rng& rng);

}  // namespace dmce
