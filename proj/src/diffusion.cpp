#include "dmce/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dmce/noise_predictor.hpp"

namespace dmce {

NoiseSchedule::NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.size() < 2) throw std::invalid_argument("NoiseSchedule: need at least 2 steps");
    alpha_.resize(beta_.size());
    alpha_bar_.resize(beta_.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < beta_.size(); ++i) {
        if (!(beta_[i] > 0.0 && beta_[i] < 1.0))
            throw std::invalid_argument("NoiseSchedule: beta out of (0,1) at step " +
                                        std::to_string(i + 1));
        alpha_[i] = 1.0 - beta_[i];
        prod *= alpha_[i];
        alpha_bar_[i] = prod;
    }
}

NoiseSchedule linear_schedule(std::size_t t_count, double beta1, double betaT) {
    if (t_count < 2) throw std::invalid_argument("linear_schedule: T must be >= 2");
    if (!(beta1 > 0.0 && beta1 <= betaT && betaT < 1.0))
        throw std::invalid_argument("linear_schedule: need 0 < beta1 <= betaT < 1");
    std::vector<double> beta(t_count);
    const double step = (betaT - beta1) / static_cast<double>(t_count - 1);
    for (std::size_t t = 0; t < t_count; ++t) beta[t] = beta1 + static_cast<double>(t) * step;
    return NoiseSchedule(std::move(beta));
}

std::vector<double> q_sample(const std::vector<double>& x0, std::size_t t,
                             const std::vector<double>& eps, const NoiseSchedule& s) {
    if (x0.size() != eps.size())
        throw std::invalid_argument("q_sample: x0 and eps length mismatch");
    if (t < 1 || t > s.steps()) throw std::invalid_argument("q_sample: step out of range");
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    std::vector<double> x(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x[i] = a * x0[i] + b * eps[i];
    return x;
}

std::size_t select_entry_step(double sigma_eff_sq, const NoiseSchedule& s) {
    if (sigma_eff_sq < 0.0)
        throw std::invalid_argument("select_entry_step: negative noise variance");
    // (1-abar)/abar is strictly increasing in t, so the minimizer is where
    // the ratio first reaches sigma_eff_sq; compare the two neighbors and
    // break ties toward the smaller step.
    std::size_t lo = 1, hi = s.steps();
    if (sigma_eff_sq <= s.noise_to_signal(1)) return 1;
    if (sigma_eff_sq >= s.noise_to_signal(s.steps())) return s.steps();
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (s.noise_to_signal(mid) < sigma_eff_sq)
            lo = mid;
        else
            hi = mid;
    }
    const double d_lo = std::abs(sigma_eff_sq - s.noise_to_signal(lo));
    const double d_hi = std::abs(sigma_eff_sq - s.noise_to_signal(hi));
    return d_lo <= d_hi ? lo : hi;
}

std::vector<double> reverse_step(const std::vector<double>& x_t, std::size_t t,
                                 const std::vector<double>& eps_hat, const NoiseSchedule& s,
                                 Rng& rng) {
    if (t < 1 || t > s.steps()) throw std::invalid_argument("reverse_step: step out of range");
    if (x_t.size() != eps_hat.size())
        throw std::invalid_argument("reverse_step: x_t and eps_hat length mismatch");
    const double beta_t = s.beta(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double eps_coeff = beta_t / std::sqrt(1.0 - s.alpha_bar(t));
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = inv_sqrt_alpha * (x_t[i] - eps_coeff * eps_hat[i]);
    if (t > 1) {
        const double beta_tilde = beta_t * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
        // Noise follows the forward convention: standard complex Gaussian
        // per entry, i.e. N(0, 1/2) per real component.
        const double sd = std::sqrt(beta_tilde) * M_SQRT1_2;
        for (double& v : out) v += sd * rng.normal();
    }
    return out;
}

ComplexMatrix denoise_matrix(const NoisePredictor& predictor, const ComplexMatrix& observed,
                             double noise_variance, const NoiseSchedule& s, Rng& rng) {
    if (2 * observed.size() != predictor.data_dim())
        throw std::invalid_argument("denoise_matrix: predictor trained for dimension " +
                                    std::to_string(predictor.data_dim()) + ", observed has " +
                                    std::to_string(2 * observed.size()));
    const double sigma_eff_sq = noise_variance / predictor.train_signal_power();
    const std::size_t t_entry = select_entry_step(sigma_eff_sq, s);

    const std::vector<double> observed_vec = observed.to_real_vector();
    const double entry_scale = std::sqrt(s.alpha_bar(t_entry));
    std::vector<double> x(observed_vec.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = entry_scale * observed_vec[i];

    for (std::size_t t = t_entry; t >= 1; --t) {
        const std::vector<double> eps_hat = predictor.predict(x, t, observed_vec);
        x = reverse_step(x, t, eps_hat, s, rng);
    }
    return ComplexMatrix::from_real_vector(x, observed.rows(), observed.cols());
}

ComplexMatrix enhance_csi(const NoisePredictor& predictor, const CsiEstimate& est,
                          const NoiseSchedule& s, Rng& rng) {
    return denoise_matrix(predictor, est.h_hat, est.noise_variance, s, rng);
}

}  // namespace dmce
