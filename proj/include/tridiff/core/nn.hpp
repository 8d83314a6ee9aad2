#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

inline Tensor kaiming_normal(Shape shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::randn(std::move(shape), rng);
    t *= std::sqrt(1.0 / std::max(1, fan_in));
    return t;
}

struct LinearLayer {
    Param w;  // (in, out)
    Param b;  // (out)

    void init(const std::string& name, int in, int out, Rng& rng) {
        w = Param{name + ".w", kaiming_normal(Shape{in, out}, in, rng)};
        b = Param{name + ".b", Tensor(Shape{out})};
    }
    Var forward(Tape& tape, Var x) { return tape.linear(x, tape.param(w), tape.param(b)); }
    void collect(std::vector<Param*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
    int in_dim() const { return w.value.dim(0); }
    int out_dim() const { return w.value.dim(1); }
};

struct Conv2dLayer {
    Param w;  // (cout, cin, k, k)
    Param b;  // (cout), empty when bias-free
    int stride = 1;
    int pad = 0;
    bool has_bias = true;

    void init(const std::string& name, int cin, int cout, int k, int stride_, int pad_, Rng& rng,
              bool bias = true) {
        stride = stride_;
        pad = pad_;
        has_bias = bias;
        w = Param{name + ".w", kaiming_normal(Shape{cout, cin, k, k}, cin * k * k, rng)};
        b = Param{name + ".b", bias ? Tensor(Shape{cout}) : Tensor()};
    }
    Var forward(Tape& tape, Var x) {
        return tape.conv2d(x, tape.param(w), has_bias ? tape.param(b) : Var{}, stride, pad);
    }
    void collect(std::vector<Param*>& out) {
        out.push_back(&w);
        if (has_bias) out.push_back(&b);
    }
};

/// Transformer-style sinusoidal embedding of an integer timestep.
inline Tensor sinusoidal_embedding(int t, int dim) {
    Tensor out(Shape{dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / std::max(1, half));
        out[2 * i] = std::sin(t * freq);
        out[2 * i + 1] = std::cos(t * freq);
    }
    if (dim % 2 == 1) out[dim - 1] = std::sin(t);
    return out;
}

struct AttentionResult {
    Var out;      // (M,d)
    Var weights;  // (M,N), rows sum to 1
};

/// Single-head scaled dot-product attention over already-projected tokens:
/// q (M,d), k (N,d), v (N,d) -> out (M,d).
inline AttentionResult scaled_dot_attention(Tape& tape, Var q, Var k, Var v) {
    const Tensor& tq = tape.value(q);
    const Tensor& tk = tape.value(k);
    if (tq.rank() != 2 || tk.rank() != 2 || tq.dim(1) != tk.dim(1))
        throw std::invalid_argument("attention: query/key width mismatch");
    if (tk.dim(0) == 0 || tq.dim(0) == 0) throw std::invalid_argument("attention: empty token set");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tq.dim(1)));
    Var scores = tape.scale(tape.matmul(q, tape.permute(k, {1, 0})), inv_sqrt_d);
    Var weights = tape.softmax_lastdim(scores);
    return AttentionResult{tape.matmul(weights, v), weights};
}

}  // namespace tridiff
