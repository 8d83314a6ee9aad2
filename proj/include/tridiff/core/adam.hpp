#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

/// Adam with optional global-norm gradient clipping. Holds first/second
/// moment state aligned with the parameter list given at construction.
class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8, double clip_norm = 1.0)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          clip_norm_(clip_norm) {
        if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const Param* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    const std::vector<Param*>& params() const { return params_; }

    /// Pull this step's gradients off a tape. Parameters that never entered
    /// the tape get a null entry and are skipped by step().
    std::vector<const Tensor*> grads_from(const Tape& tape) const {
        std::vector<const Tensor*> grads;
        grads.reserve(params_.size());
        for (const Param* p : params_) grads.push_back(tape.grad_for(*p));
        return grads;
    }

    void step(const std::vector<const Tensor*>& grads) {
        if (grads.size() != params_.size())
            throw std::invalid_argument("Adam::step: gradient list does not match parameters");
        double scale = 1.0;
        if (clip_norm_ > 0.0) {
            double sq = 0.0;
            for (const Tensor* g : grads)
                if (g && !g->empty())
                    for (std::int64_t i = 0; i < g->size(); ++i) sq += (*g)[i] * (*g)[i];
            const double norm = std::sqrt(sq);
            if (norm > clip_norm_) scale = clip_norm_ / norm;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t k = 0; k < params_.size(); ++k) {
            const Tensor* g = grads[k];
            if (!g || g->empty()) continue;
            Tensor& p = params_[k]->value;
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            for (std::int64_t i = 0; i < p.size(); ++i) {
                const double gi = (*g)[i] * scale;
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_, clip_norm_;
    std::int64_t t_ = 0;
};

}  // namespace tridiff
