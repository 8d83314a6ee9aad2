#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/core/rng.hpp"

namespace tridiff {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

/// Dense row-major tensor of doubles. Value semantics throughout; all the
/// models here are small enough that copying is a non-issue.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
    Tensor(Shape shape, double fill)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
            throw std::invalid_argument("data length does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor randn(Shape shape, Rng& rng) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = rng.normal();
        return t;
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    /// Flat index for a 4-d tensor (n,c,h,w). The hot layout in this library.
    std::int64_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    double& at4(int n, int c, int h, int w) { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }
    double at4(int n, int c, int h, int w) const { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }

    std::int64_t idx3(int a, int b, int c) const {
        return (static_cast<std::int64_t>(a) * shape_[1] + b) * shape_[2] + c;
    }
    std::int64_t idx2(int r, int c) const { return static_cast<std::int64_t>(r) * shape_[1] + c; }
    double& at2(int r, int c) { return data_[static_cast<size_t>(idx2(r, c))]; }
    double at2(int r, int c) const { return data_[static_cast<size_t>(idx2(r, c))]; }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                        " changes element count");
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
    double mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }
    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::fabs(v));
        return m;
    }
    double max() const {
        double m = -HUGE_VAL;
        for (double v : data_) m = std::max(m, v);
        return m;
    }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        require_same_shape(o, "-=");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, double s) { return a *= s; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }

    void require_same_shape(const Tensor& o, const char* what) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string("shape mismatch in ") + what + ": " +
                                        shape_str(shape_) + " vs " + shape_str(o.shape_));
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "dot");
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double mse(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "mse");
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

inline Tensor clamp01(Tensor t) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = std::clamp(t[i], 0.0, 1.0);
    return t;
}

}  // namespace tridiff
