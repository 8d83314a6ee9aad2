#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tridiff {

/// Variance-preserving noise schedule over discrete timesteps 1..T.
///
/// Arrays are stored 0-based; the accessors take t in [1,T]. alpha_bar(0) is
/// defined as 1 (the clean-data limit) so posterior coefficients are valid at
/// t = 1. sigma_sq(t) is the authoritative squared noise coefficient,
/// computed as 1 - alpha_bar(t); sigma(t) is its square root, so
/// alpha_bar(t) + sigma_sq(t) == 1 holds exactly in floating point.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // per-step noise rate, in (0,1)
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // cumulative product of alpha
    std::vector<double> sigma_sq;   // 1 - alpha_bar
    std::vector<double> sigma;      // sqrt(sigma_sq)
    std::vector<double> w;          // per-step loss weights, default 1

    /// Original training timestep each position maps to. Identity for a
    /// schedule built by make_linear_schedule; a strided sub-schedule keeps
    /// the source steps here so the denoiser sees the embedding it was
    /// trained with.
    std::vector<int> source_step;

    void check_t(int t) const {
        if (t < 1 || t > T)
            throw std::out_of_range("timestep " + std::to_string(t) + " outside [1," +
                                    std::to_string(T) + "]");
    }

    double beta_at(int t) const { check_t(t); return beta[static_cast<size_t>(t - 1)]; }
    double alpha_at(int t) const { check_t(t); return alpha[static_cast<size_t>(t - 1)]; }
    double alpha_bar_at(int t) const {
        if (t == 0) return 1.0;
        check_t(t);
        return alpha_bar[static_cast<size_t>(t - 1)];
    }
    double sigma_sq_at(int t) const { check_t(t); return sigma_sq[static_cast<size_t>(t - 1)]; }
    double sigma_at(int t) const { check_t(t); return sigma[static_cast<size_t>(t - 1)]; }
    double w_at(int t) const { check_t(t); return w[static_cast<size_t>(t - 1)]; }
    int source_step_at(int t) const { check_t(t); return source_step[static_cast<size_t>(t - 1)]; }

    /// Standard deviation of the reverse-step posterior at t.
    double posterior_sigma_at(int t) const {
        check_t(t);
        return std::sqrt(beta_at(t) * (1.0 - alpha_bar_at(t - 1)) / (1.0 - alpha_bar_at(t)));
    }
};

namespace detail {
inline NoiseSchedule from_betas(std::vector<double> betas) {
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.beta = std::move(betas);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    s.sigma_sq.resize(s.beta.size());
    s.sigma.resize(s.beta.size());
    s.w.assign(s.beta.size(), 1.0);
    s.source_step.resize(s.beta.size());
    double running = 1.0;
    for (size_t i = 0; i < s.beta.size(); ++i) {
        if (!(s.beta[i] > 0.0 && s.beta[i] < 1.0))
            throw std::invalid_argument("beta[" + std::to_string(i + 1) + "]=" +
                                        std::to_string(s.beta[i]) + " outside (0,1)");
        s.alpha[i] = 1.0 - s.beta[i];
        running *= s.alpha[i];
        s.alpha_bar[i] = running;
        s.sigma_sq[i] = 1.0 - s.alpha_bar[i];
        s.sigma[i] = std::sqrt(s.sigma_sq[i]);
        s.source_step[i] = static_cast<int>(i) + 1;
    }
    return s;
}
}  // namespace detail

/// Linear beta ramp from beta_start to beta_end inclusive.
inline NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<size_t>(T));
    for (int i = 0; i < T; ++i)
        betas[static_cast<size_t>(i)] =
            T == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (T - 1);
    return detail::from_betas(std::move(betas));
}

/// Sub-schedule over `steps` timesteps tau_1 < ... < tau_steps = T of the
/// source schedule. Effective betas come from the alpha_bar ratios, so the
/// sub-schedule's alpha_bar at position i equals the source alpha_bar at
/// tau_i and ancestral steps over the subsequence stay consistent with the
/// training marginals. source_step records tau_i for timestep conditioning.
inline NoiseSchedule make_strided_schedule(const NoiseSchedule& src, int steps) {
    if (steps < 1) throw std::invalid_argument("strided schedule needs steps >= 1");
    if (steps > src.T)
        throw std::invalid_argument("steps " + std::to_string(steps) + " exceeds schedule T " +
                                    std::to_string(src.T));
    NoiseSchedule s;
    s.T = steps;
    s.beta.resize(static_cast<size_t>(steps));
    s.alpha.resize(static_cast<size_t>(steps));
    s.alpha_bar.resize(static_cast<size_t>(steps));
    s.sigma_sq.resize(static_cast<size_t>(steps));
    s.sigma.resize(static_cast<size_t>(steps));
    s.w.assign(static_cast<size_t>(steps), 1.0);
    s.source_step.resize(static_cast<size_t>(steps));
    double prev_ab = 1.0;
    for (int i = 1; i <= steps; ++i) {
        const int tau = static_cast<int>((static_cast<std::int64_t>(i) * src.T) / steps);
        const double ab = src.alpha_bar_at(tau);
        const size_t k = static_cast<size_t>(i - 1);
        s.alpha[k] = ab / prev_ab;
        s.beta[k] = 1.0 - s.alpha[k];
        s.alpha_bar[k] = ab;
        s.sigma_sq[k] = 1.0 - ab;
        s.sigma[k] = std::sqrt(s.sigma_sq[k]);
        s.source_step[k] = tau;
        prev_ab = ab;
    }
    return s;
}

}  // namespace tridiff
