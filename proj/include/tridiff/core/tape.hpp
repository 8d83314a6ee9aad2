#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tridiff/core/tensor.hpp"

namespace tridiff {

/// Named trainable tensor. Modules own their Params; optimizers and
/// checkpoints address them by name.
struct Param {
    std::string name;
    Tensor value;
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Operations record their forward result and a
/// backward closure; backward() replays the closures in reverse creation
/// order, accumulating into each node's grad.
///
/// A Param bound twice on the same tape maps to one node, so weight reuse
/// (e.g. the same conv applied to every frame) accumulates gradients
/// naturally.
class Tape {
public:
    Var constant(Tensor value) { return make_node(std::move(value)); }

    Var param(Param& p) {
        auto it = param_vars_.find(&p);
        if (it != param_vars_.end()) return it->second;
        Var v = make_node(p.value);
        param_vars_.emplace(&p, v);
        return v;
    }

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }

    const Tensor& grad(Var v) const {
        const Node& n = nodes_[check(v)];
        if (n.grad.empty() && n.value.size() > 0)
            throw std::logic_error("grad read before backward()");
        return n.grad;
    }

    /// Gradient for a bound Param, or nullptr if it never entered this tape.
    const Tensor* grad_for(const Param& p) const {
        auto it = param_vars_.find(const_cast<Param*>(&p));
        if (it == param_vars_.end()) return nullptr;
        return &nodes_[static_cast<size_t>(it->second.id)].grad;
    }

    void backward(Var loss) {
        Node& root = nodes_[check(loss)];
        if (root.value.size() != 1)
            throw std::invalid_argument("backward() expects a scalar loss, got " +
                                        shape_str(root.value.shape()));
        for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
        root.grad[0] = 1.0;
        for (std::int64_t i = loss.id; i >= 0; --i)
            if (nodes_[static_cast<size_t>(i)].back) nodes_[static_cast<size_t>(i)].back();
    }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        ta.require_same_shape(tb, "add");
        Tensor out = ta;
        out += tb;
        Var v = make_node(std::move(out));
        record(v, [this, v, a, b] {
            accumulate(a, nodes_[check(v)].grad);
            accumulate(b, nodes_[check(v)].grad);
        });
        return v;
    }

    Var sub(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        ta.require_same_shape(tb, "sub");
        Tensor out = ta;
        out -= tb;
        Var v = make_node(std::move(out));
        record(v, [this, v, a, b] {
            const Tensor& g = nodes_[check(v)].grad;
            accumulate(a, g);
            Tensor neg = g;
            neg *= -1.0;
            accumulate(b, neg);
        });
        return v;
    }

    Var mul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        ta.require_same_shape(tb, "mul");
        Tensor out = ta;
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        Var v = make_node(std::move(out));
        record(v, [this, v, a, b] {
            const Tensor& g = nodes_[check(v)].grad;
            const Tensor &ta2 = value(a), &tb2 = value(b);
            Tensor da(ta2.shape()), db(tb2.shape());
            for (std::int64_t i = 0; i < g.size(); ++i) {
                da[i] = g[i] * tb2[i];
                db[i] = g[i] * ta2[i];
            }
            accumulate(a, da);
            accumulate(b, db);
        });
        return v;
    }

    Var scale(Var a, double s) {
        Tensor out = value(a);
        out *= s;
        Var v = make_node(std::move(out));
        record(v, [this, v, a, s] {
            Tensor g = nodes_[check(v)].grad;
            g *= s;
            accumulate(a, g);
        });
        return v;
    }

    Var silu(Var a) {
        const Tensor& ta = value(a);
        Tensor out(ta.shape());
        for (std::int64_t i = 0; i < ta.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-ta[i]));
            out[i] = ta[i] * s;
        }
        Var v = make_node(std::move(out));
        record(v, [this, v, a] {
            const Tensor& g = nodes_[check(v)].grad;
            const Tensor& x = value(a);
            Tensor dx(x.shape());
            for (std::int64_t i = 0; i < x.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x[i]));
                dx[i] = g[i] * s * (1.0 + x[i] * (1.0 - s));
            }
            accumulate(a, dx);
        });
        return v;
    }

    Var sigmoid(Var a) {
        const Tensor& ta = value(a);
        Tensor out(ta.shape());
        for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-ta[i]));
        Var v = make_node(std::move(out));
        record(v, [this, v, a] {
            const Tensor& g = nodes_[check(v)].grad;
            const Tensor& y = nodes_[check(v)].value;
            Tensor dx(y.shape());
            for (std::int64_t i = 0; i < y.size(); ++i) dx[i] = g[i] * y[i] * (1.0 - y[i]);
            accumulate(a, dx);
        });
        return v;
    }

    // ---- shape ----

    Var reshape(Var a, Shape shape) {
        Tensor out = value(a).reshaped(shape);
        Var v = make_node(std::move(out));
        record(v, [this, v, a] {
            accumulate(a, nodes_[check(v)].grad.reshaped(value(a).shape()));
        });
        return v;
    }

    Var permute(Var a, std::vector<int> axes) {
        const Tensor& ta = value(a);
        Var v = make_node(permute_tensor(ta, axes));
        record(v, [this, v, a, axes] {
            std::vector<int> inv(axes.size());
            for (size_t i = 0; i < axes.size(); ++i) inv[static_cast<size_t>(axes[i])] = static_cast<int>(i);
            accumulate(a, permute_tensor(nodes_[check(v)].grad, inv));
        });
        return v;
    }

    /// Stack k same-shaped vectors (d,) into (k,d).
    Var stack_rows(const std::vector<Var>& rows) {
        if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
        const int d = static_cast<int>(value(rows[0]).size());
        Tensor out(Shape{static_cast<int>(rows.size()), d});
        for (size_t r = 0; r < rows.size(); ++r) {
            const Tensor& t = value(rows[r]);
            if (t.size() != d) throw std::invalid_argument("stack_rows: ragged rows");
            for (int j = 0; j < d; ++j) out[static_cast<std::int64_t>(r) * d + j] = t[j];
        }
        Var v = make_node(std::move(out));
        record(v, [this, v, rows, d] {
            const Tensor& g = nodes_[check(v)].grad;
            for (size_t r = 0; r < rows.size(); ++r) {
                Tensor gr(value(rows[r]).shape());
                for (int j = 0; j < d; ++j) gr[j] = g[static_cast<std::int64_t>(r) * d + j];
                accumulate(rows[r], gr);
            }
        });
        return v;
    }

    /// Concatenate two 1-d vectors.
    Var concat_vec(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        Tensor out(Shape{static_cast<int>(ta.size() + tb.size())});
        for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i];
        for (std::int64_t i = 0; i < tb.size(); ++i) out[ta.size() + i] = tb[i];
        Var v = make_node(std::move(out));
        record(v, [this, v, a, b] {
            const Tensor& g = nodes_[check(v)].grad;
            const std::int64_t na = value(a).size();
            Tensor ga(value(a).shape()), gb(value(b).shape());
            for (std::int64_t i = 0; i < na; ++i) ga[i] = g[i];
            for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] = g[na + i];
            accumulate(a, ga);
            accumulate(b, gb);
        });
        return v;
    }

    // ---- reductions ----

    Var mean_all(Var a) {
        const Tensor& ta = value(a);
        Var v = make_node(Tensor::scalar(ta.mean()));
        record(v, [this, v, a] {
            const double g = nodes_[check(v)].grad[0];
            const Tensor& x = value(a);
            Tensor dx(x.shape(), g / static_cast<double>(x.size()));
            accumulate(a, dx);
        });
        return v;
    }

    /// Mean over axis 0 of a (M,d) matrix -> (d,).
    Var mean_axis0(Var a) {
        const Tensor& ta = value(a);
        if (ta.rank() != 2) throw std::invalid_argument("mean_axis0 expects rank-2 input");
        const int m = ta.dim(0), d = ta.dim(1);
        Tensor out(Shape{d});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) out[j] += ta[static_cast<std::int64_t>(i) * d + j];
        out *= 1.0 / m;
        Var v = make_node(std::move(out));
        record(v, [this, v, a, m, d] {
            const Tensor& g = nodes_[check(v)].grad;
            Tensor dx(Shape{m, d});
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) dx[static_cast<std::int64_t>(i) * d + j] = g[j] / m;
            accumulate(a, dx);
        });
        return v;
    }

    /// Mean squared error against a constant target; returns a scalar node.
    Var mse_to(Var pred, const Tensor& target) {
        const Tensor& tp = value(pred);
        tp.require_same_shape(target, "mse_to");
        Var v = make_node(Tensor::scalar(mse(tp, target)));
        Tensor tgt = target;
        record(v, [this, v, pred, tgt] {
            const double g = nodes_[check(v)].grad[0];
            const Tensor& p = value(pred);
            Tensor dp(p.shape());
            const double c = 2.0 * g / static_cast<double>(p.size());
            for (std::int64_t i = 0; i < p.size(); ++i) dp[i] = c * (p[i] - tgt[i]);
            accumulate(pred, dp);
        });
        return v;
    }

    // ---- linear algebra ----

    Var matmul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0))
            throw std::invalid_argument("matmul shape mismatch: " + shape_str(ta.shape()) + " x " +
                                        shape_str(tb.shape()));
        Var v = make_node(matmul_tensor(ta, tb, false, false));
        record(v, [this, v, a, b] {
            const Tensor& g = nodes_[check(v)].grad;
            accumulate(a, matmul_tensor(g, value(b), false, true));
            accumulate(b, matmul_tensor(value(a), g, true, false));
        });
        return v;
    }

    /// Batched matmul: (B,M,K) x (B,K,N) -> (B,M,N).
    Var bmm(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.rank() != 3 || tb.rank() != 3 || ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(1))
            throw std::invalid_argument("bmm shape mismatch: " + shape_str(ta.shape()) + " x " +
                                        shape_str(tb.shape()));
        Var v = make_node(bmm_tensor(ta, tb, false, false));
        record(v, [this, v, a, b] {
            const Tensor& g = nodes_[check(v)].grad;
            accumulate(a, bmm_tensor(g, value(b), false, true));
            accumulate(b, bmm_tensor(value(a), g, true, false));
        });
        return v;
    }

    /// x (...,in) -> (...,out) through weight (in,out) plus bias (out).
    Var linear(Var x, Var w, Var bias) {
        const Tensor& tx = value(x);
        const Tensor& tw = value(w);
        const int in = tw.dim(0), out = tw.dim(1);
        if (tx.rank() < 1 || tx.dim(tx.rank() - 1) != in)
            throw std::invalid_argument("linear: input width " + shape_str(tx.shape()) +
                                        " does not match weight " + shape_str(tw.shape()));
        Shape out_shape = tx.shape();
        out_shape.back() = out;
        const int rows = static_cast<int>(tx.size() / in);
        Var flat = reshape(x, Shape{rows, in});
        Var y = matmul(flat, w);
        if (bias.valid()) y = add_row_bias(y, bias);
        return reshape(y, out_shape);
    }

    /// (M,N) + (N,) broadcast over rows.
    Var add_row_bias(Var x, Var bias) {
        const Tensor &tx = value(x), &tb = value(bias);
        if (tx.rank() != 2 || tb.rank() != 1 || tx.dim(1) != tb.dim(0))
            throw std::invalid_argument("add_row_bias shape mismatch");
        Tensor out = tx;
        const int m = tx.dim(0), n = tx.dim(1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[static_cast<std::int64_t>(i) * n + j] += tb[j];
        Var v = make_node(std::move(out));
        record(v, [this, v, x, bias, m, n] {
            const Tensor& g = nodes_[check(v)].grad;
            accumulate(x, g);
            Tensor db(Shape{n});
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) db[j] += g[static_cast<std::int64_t>(i) * n + j];
            accumulate(bias, db);
        });
        return v;
    }

    /// (N,C,H,W) + (C,) broadcast per channel.
    Var add_channel_bias(Var x, Var bias) {
        const Tensor &tx = value(x), &tb = value(bias);
        if (tx.rank() != 4 || tb.rank() != 1 || tx.dim(1) != tb.dim(0))
            throw std::invalid_argument("add_channel_bias shape mismatch");
        Tensor out = tx;
        const int n = tx.dim(0), c = tx.dim(1), hw = tx.dim(2) * tx.dim(3);
        for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci) {
                const std::int64_t base = (static_cast<std::int64_t>(ni) * c + ci) * hw;
                for (int k = 0; k < hw; ++k) out[base + k] += tb[ci];
            }
        Var v = make_node(std::move(out));
        record(v, [this, v, x, bias, n, c, hw] {
            const Tensor& g = nodes_[check(v)].grad;
            accumulate(x, g);
            Tensor db(Shape{c});
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const std::int64_t base = (static_cast<std::int64_t>(ni) * c + ci) * hw;
                    for (int k = 0; k < hw; ++k) db[ci] += g[base + k];
                }
            accumulate(bias, db);
        });
        return v;
    }

    Var softmax_lastdim(Var a) {
        const Tensor& ta = value(a);
        if (ta.rank() < 1) throw std::invalid_argument("softmax needs rank >= 1");
        const int n = ta.dim(ta.rank() - 1);
        const std::int64_t rows = ta.size() / n;
        Tensor out(ta.shape());
        for (std::int64_t r = 0; r < rows; ++r) {
            const std::int64_t base = r * n;
            double mx = -HUGE_VAL;
            for (int j = 0; j < n; ++j) mx = std::max(mx, ta[base + j]);
            double z = 0.0;
            for (int j = 0; j < n; ++j) {
                out[base + j] = std::exp(ta[base + j] - mx);
                z += out[base + j];
            }
            for (int j = 0; j < n; ++j) out[base + j] /= z;
        }
        Var v = make_node(std::move(out));
        record(v, [this, v, a, n] {
            const Tensor& g = nodes_[check(v)].grad;
            const Tensor& y = nodes_[check(v)].value;
            Tensor dx(y.shape());
            const std::int64_t rows2 = y.size() / n;
            for (std::int64_t r = 0; r < rows2; ++r) {
                const std::int64_t base = r * n;
                double gy = 0.0;
                for (int j = 0; j < n; ++j) gy += g[base + j] * y[base + j];
                for (int j = 0; j < n; ++j) dx[base + j] = y[base + j] * (g[base + j] - gy);
            }
            accumulate(a, dx);
        });
        return v;
    }

    // ---- convolution ----

    /// x (N,Cin,H,W), w (Cout,Cin,kh,kw), optional bias (Cout).
    Var conv2d(Var x, Var w, Var bias, int stride, int pad) {
        const Tensor &tx = value(x), &tw = value(w);
        if (tx.rank() != 4 || tw.rank() != 4 || tx.dim(1) != tw.dim(1))
            throw std::invalid_argument("conv2d shape mismatch: x " + shape_str(tx.shape()) +
                                        ", w " + shape_str(tw.shape()));
        Var v = make_node(conv2d_forward(tx, tw, bias.valid() ? &value(bias) : nullptr, stride, pad));
        record(v, [this, v, x, w, bias, stride, pad] {
            const Tensor& g = nodes_[check(v)].grad;
            const Tensor &tx2 = value(x), &tw2 = value(w);
            Tensor dx(tx2.shape()), dw(tw2.shape());
            conv2d_backward(tx2, tw2, g, stride, pad, dx, dw);
            accumulate(x, dx);
            accumulate(w, dw);
            if (bias.valid()) {
                const int cout = tw2.dim(0);
                Tensor db(Shape{cout});
                const int n = g.dim(0), ho = g.dim(2), wo = g.dim(3);
                for (int ni = 0; ni < n; ++ni)
                    for (int co = 0; co < cout; ++co)
                        for (int i = 0; i < ho; ++i)
                            for (int j = 0; j < wo; ++j) db[co] += g.at4(ni, co, i, j);
                accumulate(bias, db);
            }
        });
        return v;
    }

    Var upsample_nearest2x(Var x) {
        const Tensor& tx = value(x);
        if (tx.rank() != 4) throw std::invalid_argument("upsample expects NCHW");
        const int n = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
        Tensor out(Shape{n, c, 2 * h, 2 * w});
        for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci)
                for (int i = 0; i < 2 * h; ++i)
                    for (int j = 0; j < 2 * w; ++j)
                        out.at4(ni, ci, i, j) = tx.at4(ni, ci, i / 2, j / 2);
        Var v = make_node(std::move(out));
        record(v, [this, v, x, n, c, h, w] {
            const Tensor& g = nodes_[check(v)].grad;
            Tensor dx(Shape{n, c, h, w});
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < 2 * h; ++i)
                        for (int j = 0; j < 2 * w; ++j)
                            dx.at4(ni, ci, i / 2, j / 2) += g.at4(ni, ci, i, j);
            accumulate(x, dx);
        });
        return v;
    }

    /// Row `row` of a (V,d) table -> (d,).
    Var embed_row(Var table, int row) {
        const Tensor& tt = value(table);
        if (tt.rank() != 2 || row < 0 || row >= tt.dim(0))
            throw std::out_of_range("embed_row: row " + std::to_string(row) + " out of table " +
                                    shape_str(tt.shape()));
        const int d = tt.dim(1);
        Tensor out(Shape{d});
        for (int j = 0; j < d; ++j) out[j] = tt[static_cast<std::int64_t>(row) * d + j];
        Var v = make_node(std::move(out));
        record(v, [this, v, table, row, d] {
            const Tensor& g = nodes_[check(v)].grad;
            Tensor dt(value(table).shape());
            for (int j = 0; j < d; ++j) dt[static_cast<std::int64_t>(row) * d + j] = g[j];
            accumulate(table, dt);
        });
        return v;
    }

    // ---- shared tensor kernels (also usable without a tape) ----

    static Tensor permute_tensor(const Tensor& t, const std::vector<int>& axes) {
        const int r = t.rank();
        if (static_cast<int>(axes.size()) != r) throw std::invalid_argument("permute: axes rank mismatch");
        Shape out_shape(static_cast<size_t>(r));
        for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = t.dim(axes[static_cast<size_t>(i)]);
        Tensor out(out_shape);
        std::vector<std::int64_t> in_strides(static_cast<size_t>(r), 1);
        for (int i = r - 2; i >= 0; --i)
            in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i) + 1] * t.dim(i + 1);
        std::vector<int> idx(static_cast<size_t>(r), 0);
        for (std::int64_t o = 0; o < out.size(); ++o) {
            std::int64_t src = 0;
            for (int i = 0; i < r; ++i)
                src += static_cast<std::int64_t>(idx[static_cast<size_t>(i)]) *
                       in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
            out[o] = t[src];
            for (int i = r - 1; i >= 0; --i) {
                if (++idx[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
                idx[static_cast<size_t>(i)] = 0;
            }
        }
        return out;
    }

    static Tensor matmul_tensor(const Tensor& a, const Tensor& b, bool ta, bool tb) {
        const int m = ta ? a.dim(1) : a.dim(0);
        const int k = ta ? a.dim(0) : a.dim(1);
        const int k2 = tb ? b.dim(1) : b.dim(0);
        const int n = tb ? b.dim(0) : b.dim(1);
        if (k != k2) throw std::invalid_argument("matmul inner dim mismatch");
        Tensor out(Shape{m, n});
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const double av = ta ? a.at2(p, i) : a.at2(i, p);
                if (av == 0.0) continue;
                for (int j = 0; j < n; ++j)
                    out.at2(i, j) += av * (tb ? b.at2(j, p) : b.at2(p, j));
            }
        return out;
    }

    static Tensor bmm_tensor(const Tensor& a, const Tensor& b, bool ta, bool tb) {
        const int batch = a.dim(0);
        if (b.dim(0) != batch) throw std::invalid_argument("bmm batch mismatch");
        const int m = ta ? a.dim(2) : a.dim(1);
        const int k = ta ? a.dim(1) : a.dim(2);
        const int n = tb ? b.dim(1) : b.dim(2);
        Tensor out(Shape{batch, m, n});
        for (int bi = 0; bi < batch; ++bi)
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double av = ta ? a[a.idx3(bi, p, i)] : a[a.idx3(bi, i, p)];
                    if (av == 0.0) continue;
                    for (int j = 0; j < n; ++j)
                        out[out.idx3(bi, i, j)] += av * (tb ? b[b.idx3(bi, j, p)] : b[b.idx3(bi, p, j)]);
                }
        return out;
    }

    static Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                                 int stride, int pad) {
        const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
        const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
        const int ho = (h + 2 * pad - kh) / stride + 1;
        const int wo = (ww + 2 * pad - kw) / stride + 1;
        if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: output would be empty");
        Tensor out(Shape{n, cout, ho, wo});
        const double* xd = x.data();
        const double* wd = w.data();
        double* od = out.data();
        for (int ni = 0; ni < n; ++ni)
            for (int co = 0; co < cout; ++co) {
                double* out_plane = od + (static_cast<std::int64_t>(ni) * cout + co) * ho * wo;
                if (bias) {
                    const double b = (*bias)[co];
                    for (int i = 0; i < ho * wo; ++i) out_plane[i] = b;
                }
                for (int ci = 0; ci < cin; ++ci) {
                    const double* x_plane =
                        xd + (static_cast<std::int64_t>(ni) * cin + ci) * h * ww;
                    const double* w_base =
                        wd + (static_cast<std::int64_t>(co) * cin + ci) * kh * kw;
                    for (int ki = 0; ki < kh; ++ki)
                        for (int kj = 0; kj < kw; ++kj) {
                            const double wv = w_base[ki * kw + kj];
                            if (wv == 0.0) continue;
                            int i0, i1, j0, j1;
                            tap_range(pad, ki, stride, h, ho, i0, i1);
                            tap_range(pad, kj, stride, ww, wo, j0, j1);
                            for (int i = i0; i < i1; ++i) {
                                const double* xr = x_plane +
                                                   static_cast<std::int64_t>(i * stride - pad + ki) * ww +
                                                   (j0 * stride - pad + kj);
                                double* orow = out_plane + static_cast<std::int64_t>(i) * wo + j0;
                                if (stride == 1) {
                                    for (int j = 0; j < j1 - j0; ++j) orow[j] += wv * xr[j];
                                } else {
                                    for (int j = 0; j < j1 - j0; ++j) orow[j] += wv * xr[j * stride];
                                }
                            }
                        }
                }
            }
        return out;
    }

    static void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                                int stride, int pad, Tensor& dx, Tensor& dw) {
        const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
        const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
        const int ho = g.dim(2), wo = g.dim(3);
        const double* xd = x.data();
        const double* wd = w.data();
        const double* gd = g.data();
        double* dxd = dx.data();
        double* dwd = dw.data();
        for (int ni = 0; ni < n; ++ni)
            for (int co = 0; co < cout; ++co) {
                const double* g_plane = gd + (static_cast<std::int64_t>(ni) * cout + co) * ho * wo;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* x_plane =
                        xd + (static_cast<std::int64_t>(ni) * cin + ci) * h * ww;
                    double* dx_plane = dxd + (static_cast<std::int64_t>(ni) * cin + ci) * h * ww;
                    const std::int64_t w_base = (static_cast<std::int64_t>(co) * cin + ci) * kh * kw;
                    for (int ki = 0; ki < kh; ++ki)
                        for (int kj = 0; kj < kw; ++kj) {
                            const double wv = wd[w_base + ki * kw + kj];
                            double acc_dw = 0.0;
                            int i0, i1, j0, j1;
                            tap_range(pad, ki, stride, h, ho, i0, i1);
                            tap_range(pad, kj, stride, ww, wo, j0, j1);
                            for (int i = i0; i < i1; ++i) {
                                const std::int64_t in_off =
                                    static_cast<std::int64_t>(i * stride - pad + ki) * ww +
                                    (j0 * stride - pad + kj);
                                const double* gr = g_plane + static_cast<std::int64_t>(i) * wo + j0;
                                const double* xr = x_plane + in_off;
                                double* dxr = dx_plane + in_off;
                                if (stride == 1) {
                                    for (int j = 0; j < j1 - j0; ++j) {
                                        const double gv = gr[j];
                                        dxr[j] += gv * wv;
                                        acc_dw += gv * xr[j];
                                    }
                                } else {
                                    for (int j = 0; j < j1 - j0; ++j) {
                                        const double gv = gr[j];
                                        dxr[j * stride] += gv * wv;
                                        acc_dw += gv * xr[j * stride];
                                    }
                                }
                            }
                            dwd[w_base + ki * kw + kj] += acc_dw;
                        }
                }
            }
    }

private:
    /// Output index range [lo, hi) for one kernel tap so that the
    /// corresponding input index i*stride - pad + k stays inside [0, extent).
    static void tap_range(int pad, int k, int stride, int extent, int out_extent, int& lo,
                          int& hi) {
        const int num = pad - k;
        lo = num <= 0 ? 0 : (num + stride - 1) / stride;
        const int top = extent - 1 + pad - k;
        hi = top < 0 ? 0 : std::min(out_extent, top / stride + 1);
        if (hi < lo) hi = lo;
    }

    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> back;
    };

    size_t check(Var v) const {
        if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
            throw std::logic_error("Var does not belong to this tape");
        return static_cast<size_t>(v.id);
    }

    Var make_node(Tensor value) {
        nodes_.push_back(Node{std::move(value), Tensor(), nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void record(Var v, std::function<void()> back) { nodes_[check(v)].back = std::move(back); }

    void accumulate(Var v, const Tensor& g) {
        Node& n = nodes_[check(v)];
        n.grad += g;
    }

    // deque: appending nodes must not invalidate value()/grad() references
    // held by callers composing nested ops
    std::deque<Node> nodes_;
    std::unordered_map<Param*, Var> param_vars_;
};

}  // namespace tridiff
