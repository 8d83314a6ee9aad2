#pragma once

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tridiff/core/tensor.hpp"
#include "tridiff/metrics/feature_nets.hpp"

namespace tridiff {

struct GaussianStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;  // symmetric
    int n = 0;

    int dim() const { return static_cast<int>(mu.size()); }
};

/// Sample mean and covariance (n-1 denominator) of row-feature matrix
/// (n, d_f); the covariance is explicitly symmetrized.
inline GaussianStats gaussian_stats(const Tensor& features) {
    if (features.rank() != 2) throw std::invalid_argument("gaussian_stats expects (n,d) features");
    const int n = features.dim(0), d = features.dim(1);
    if (n < 2) throw std::invalid_argument("gaussian_stats needs at least 2 samples");
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = features.at2(i, j);
    GaussianStats s;
    s.n = n;
    s.mu = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - s.mu.transpose();
    s.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
    s.sigma = ((s.sigma + s.sigma.transpose()) / 2.0).eval();
    return s;
}

namespace detail {
/// Positive-semidefinite square root via symmetric eigendecomposition;
/// negative eigenvalues (numerical noise) are clipped at zero.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed in matrix square root");
    Eigen::VectorXd eig = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * eig.asDiagonal() * solver.eigenvectors().transpose();
}
}  // namespace detail

/// Frechet distance between two Gaussians:
///   |mu1-mu2|^2 + tr(s1 + s2 - 2 (s1 s2)^{1/2})
/// tr((s1 s2)^{1/2}) is computed as tr((A s2 A)^{1/2}) with A = s1^{1/2},
/// which keeps every decomposition symmetric and real. Sub-epsilon negative
/// results from floating-point noise are clamped to 0.
inline double frechet_distance(const GaussianStats& s1, const GaussianStats& s2) {
    if (s1.dim() != s2.dim())
        throw std::invalid_argument("frechet_distance: feature dims differ");
    if (!s1.mu.allFinite() || !s2.mu.allFinite() || !s1.sigma.allFinite() || !s2.sigma.allFinite())
        throw std::invalid_argument("frechet_distance: non-finite statistics");
    const Eigen::MatrixXd a = detail::sqrt_psd(s1.sigma);
    const Eigen::MatrixXd inner = ((a * s2.sigma * a).eval() +
                                   (a * s2.sigma * a).transpose().eval()) /
                                  2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(inner);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed in frechet_distance");
    const double tr_sqrt = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = (s1.mu - s2.mu).squaredNorm() + s1.sigma.trace() + s2.sigma.trace() -
                     2.0 * tr_sqrt;
    return std::max(d, 0.0);
}

/// Feature matrix (n_clips, d_f) for a clip set.
inline Tensor clip_features(const std::vector<Tensor>& clips, const VideoFeatureNet& net) {
    if (clips.empty()) throw std::invalid_argument("empty clip set");
    Tensor out(Shape{static_cast<int>(clips.size()), net.out_dim()});
    for (size_t i = 0; i < clips.size(); ++i) {
        Tensor f = net.features(clips[i]);
        for (int j = 0; j < net.out_dim(); ++j) out.at2(static_cast<int>(i), j) = f[j];
    }
    return out;
}

/// Frechet distance between feature distributions of real and generated
/// clip sets. Warns (stderr) when a set is smaller than d_f/4 clips: the
/// covariance estimate is then strongly degenerate.
inline double fvd(const std::vector<Tensor>& real_clips, const std::vector<Tensor>& gen_clips,
                  const VideoFeatureNet& net) {
    if (real_clips.empty() || gen_clips.empty())
        throw std::invalid_argument("fvd: empty clip set");
    const size_t min_clips = static_cast<size_t>(net.out_dim()) / 4;
    if (real_clips.size() < min_clips || gen_clips.size() < min_clips)
        std::cerr << "[fvd] warning: clip set smaller than " << min_clips
                  << "; distance estimate will be noisy\n";
    return frechet_distance(gaussian_stats(clip_features(real_clips, net)),
                            gaussian_stats(clip_features(gen_clips, net)));
}

}  // namespace tridiff
