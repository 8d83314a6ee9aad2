#pragma once

#include <cmath>
#include <functional>

#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"
#include "tridiff/diffusion/process.hpp"
#include "tridiff/diffusion/schedule.hpp"

namespace tridiff {

/// Denoiser abstraction used by the loss and the sampler: appends the
/// epsilon-prediction for (z_t, t, cond) to the tape. cond may be invalid
/// for unconditional use.
using DenoiseFn = std::function<Var(Tape&, Var z_t, int t, Var cond)>;

/// Denoising objective for one clip, appended to an existing tape so the
/// conditioning subgraph stays differentiable. Samples t uniform on {1..T}
/// and eps standard normal, noises x to z_t, and scores the model's
/// clean-sample reconstruction against x with weighted MSE:
///   w_t * || (z_t - sigma_t eps_hat) / sqrt(alpha_bar_t) - x ||^2 / N
inline Var training_loss_on_tape(Tape& tape, const Tensor& x, Var cond, const DenoiseFn& model,
                                 const NoiseSchedule& sched, Rng& rng) {
    const int t = static_cast<int>(rng.uniform_int(1, sched.T));
    Tensor eps(x.shape());
    for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();

    Var z_t = tape.constant(forward_marginal(x, t, eps, sched));
    Var eps_hat = model(tape, z_t, t, cond);
    Var x_hat = tape.scale(tape.sub(z_t, tape.scale(eps_hat, sched.sigma_at(t))),
                           1.0 / std::sqrt(sched.alpha_bar_at(t)));
    return tape.scale(tape.mse_to(x_hat, x), sched.w_at(t));
}

/// Convenience wrapper: evaluates the loss value on a throwaway tape.
/// A non-finite result is returned as-is; callers decide how to report it.
inline double training_loss(const Tensor& x, const Tensor& cond, const DenoiseFn& model,
                            const NoiseSchedule& sched, Rng& rng) {
    Tape tape;
    Var cond_var = cond.empty() ? Var{} : tape.constant(cond);
    return tape.value(training_loss_on_tape(tape, x, cond_var, model, sched, rng))[0];
}

}  // namespace tridiff
