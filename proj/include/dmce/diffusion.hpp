#pragma once

#include <cstddef>
#include <vector>

#include "dmce/channel.hpp"
#include "dmce/complex_matrix.hpp"
#include "dmce/rng.hpp"

namespace dmce {

/// Forward-process variance tables. Steps are 1-based: beta(1) is the first
/// noising step and beta(T) the last. alpha_bar(0) is defined as 1.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> beta);

    std::size_t steps() const { return beta_.size(); }
    double beta(std::size_t t) const { return beta_[t - 1]; }
    double alpha(std::size_t t) const { return alpha_[t - 1]; }
    double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar_[t - 1]; }

    /// Noise-to-signal power ratio (1 - alpha_bar_t) / alpha_bar_t.
    double noise_to_signal(std::size_t t) const {
        return (1.0 - alpha_bar(t)) / alpha_bar(t);
    }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// Linear beta schedule from beta1 to betaT over T steps.
/// Requires T >= 2 and 0 < beta1 <= betaT < 1.
NoiseSchedule linear_schedule(std::size_t t_count, double beta1, double betaT);

/// Forward sample x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> q_sample(const std::vector<double>& x0, std::size_t t,
                             const std::vector<double>& eps, const NoiseSchedule& s);

/// Smallest t in [1, T] minimizing |sigma_eff_sq - (1-abar_t)/abar_t|.
/// sigma_eff_sq is the estimate's noise variance divided by the per-entry
/// signal power. Monotone nondecreasing in sigma_eff_sq.
std::size_t select_entry_step(double sigma_eff_sq, const NoiseSchedule& s);

/// One reverse step:
///   x_{t-1} = (x_t - beta_t / sqrt(1-abar_t) * eps_hat) / sqrt(alpha_t)
///             + sqrt(beta_t (1-abar_{t-1}) / (1-abar_t)) * z,
/// where z is standard complex Gaussian noise in the flat real layout
/// (each component N(0, 1/2)), matching the forward noise convention, and
/// z = 0 at t = 1.
std::vector<double> reverse_step(const std::vector<double>& x_t, std::size_t t,
                                 const std::vector<double>& eps_hat, const NoiseSchedule& s,
                                 Rng& rng);

class NoisePredictor;

/// The channel enhancer: map the pilot estimate onto the diffusion
/// trajectory at the step whose noise ratio matches the estimate's, then
/// run the learned reverse chain down to step 1.
ComplexMatrix enhance_csi(const NoisePredictor& predictor, const CsiEstimate& est,
                          const NoiseSchedule& s, Rng& rng);

/// Same chain on an arbitrary matrix observed with the given noise
/// variance; used both by enhance_csi and by the received-signal
/// (Y-oriented) denoising mode.
ComplexMatrix denoise_matrix(const NoisePredictor& predictor, const ComplexMatrix& observed,
                             double noise_variance, const NoiseSchedule& s, Rng& rng);

}  // namespace dmce
