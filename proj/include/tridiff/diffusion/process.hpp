#pragma once

#include <cmath>
#include <stdexcept>

#include "tridiff/core/rng.hpp"
#include "tridiff/core/tensor.hpp"
#include "tridiff/diffusion/schedule.hpp"

namespace tridiff {

/// One forward noising step: z_t = sqrt(1-beta_t) z_{t-1} + sqrt(beta_t) eps.
inline Tensor forward_step(const Tensor& z_prev, int t, const Tensor& eps,
                           const NoiseSchedule& sched) {
    z_prev.require_same_shape(eps, "forward_step");
    sched.check_t(t);
    const double a = std::sqrt(1.0 - sched.beta_at(t));
    const double b = std::sqrt(sched.beta_at(t));
    Tensor out(z_prev.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a * z_prev[i] + b * eps[i];
    return out;
}

/// Closed-form marginal of t forward steps:
/// z_t = sqrt(alpha_bar_t) z_0 + sigma_t eps.
inline Tensor forward_marginal(const Tensor& z0, int t, const Tensor& eps,
                               const NoiseSchedule& sched) {
    z0.require_same_shape(eps, "forward_marginal");
    sched.check_t(t);
    const double a = std::sqrt(sched.alpha_bar_at(t));
    const double s = sched.sigma_at(t);
    Tensor out(z0.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + s * eps[i];
    return out;
}

/// One ancestral reverse step from t to t-1 given the noise prediction:
///   z_{t-1} = (z_t - (beta_t / sigma_t) eps_hat) / sqrt(alpha_t)
///             + posterior_sigma_t * noise
/// The stochastic term is forced to zero at t = 1 (the final step is
/// deterministic); pass noise = nullptr to drop it at any t.
inline Tensor reverse_step(const Tensor& z_t, int t, const Tensor& eps_hat,
                           const NoiseSchedule& sched, const Tensor* noise = nullptr) {
    if (t == 0) throw std::out_of_range("reverse_step: t must be >= 1");
    sched.check_t(t);
    z_t.require_same_shape(eps_hat, "reverse_step");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    const double coef = sched.beta_at(t) / sched.sigma_at(t);
    Tensor out(z_t.shape());
    for (std::int64_t i = 0; i < out.size(); ++i)
        out[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
    if (t > 1 && noise != nullptr) {
        z_t.require_same_shape(*noise, "reverse_step noise");
        const double ps = sched.posterior_sigma_at(t);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] += ps * (*noise)[i];
    }
    return out;
}

/// Recover the clean-sample estimate from a noise prediction:
/// x_hat = (z_t - sigma_t eps_hat) / sqrt(alpha_bar_t).
inline Tensor predict_x0(const Tensor& z_t, int t, const Tensor& eps_hat,
                         const NoiseSchedule& sched) {
    z_t.require_same_shape(eps_hat, "predict_x0");
    sched.check_t(t);
    const double s = sched.sigma_at(t);
    const double inv = 1.0 / std::sqrt(sched.alpha_bar_at(t));
    Tensor out(z_t.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = inv * (z_t[i] - s * eps_hat[i]);
    return out;
}

}  // namespace tridiff
