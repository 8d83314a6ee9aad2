#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tridiff/metrics/feature_nets.hpp"
#include "tridiff/metrics/frechet.hpp"
#include "tridiff/metrics/quality.hpp"
#include "tridiff/metrics/report.hpp"

using namespace tridiff;

TEST_CASE("psnr: cap, hand value, symmetry, monotonicity") {
    Rng rng(1);
    Tensor a = clamp01(Tensor::randn(Shape{2, 3, 8, 8}, rng));
    REQUIRE(psnr(a, a) == kPsnrCapDb);

    // constant offset 0.5 -> MSE 0.25 -> 10 log10(1/0.25) = 6.0206 dB
    Tensor zeros(Shape{2, 3, 8, 8});
    Tensor half(Shape{2, 3, 8, 8}, 0.5);
    REQUIRE(psnr(zeros, half) == Catch::Approx(6.0206).margin(1e-3));

    Tensor one_flip = a;
    one_flip[17] = one_flip[17] > 0.5 ? 0.0 : 1.0;
    const double p = psnr(a, one_flip);
    REQUIRE(std::isfinite(p));
    REQUIRE(p < kPsnrCapDb);

    Tensor b = clamp01(Tensor::randn(Shape{2, 3, 8, 8}, rng));
    REQUIRE(psnr(a, b) == psnr(b, a));

    // strictly decreasing in MSE
    Tensor small_err = a, big_err = a;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        small_err[i] = std::clamp(a[i] + 0.01, 0.0, 1.0);
        big_err[i] = std::clamp(a[i] + 0.2, 0.0, 1.0);
    }
    REQUIRE(psnr(a, small_err) > psnr(a, big_err));
    REQUIRE_THROWS_AS(psnr(a, Tensor(Shape{3})), std::invalid_argument);
}

TEST_CASE("ssim: self-similarity, constant-frame hand value, symmetry, window errors") {
    Rng rng(2);
    Tensor a = clamp01(Tensor::randn(Shape{3, 16, 16}, rng));
    REQUIRE(ssim(a, a) == Catch::Approx(1.0).margin(1e-9));

    // constant 0 vs constant 1: luminance term C1/(1+C1), contrast/structure 1
    Tensor zeros(Shape{3, 16, 16});
    Tensor ones(Shape{3, 16, 16}, 1.0);
    const double expected = 1e-4 / (1.0 + 1e-4);
    REQUIRE(ssim(zeros, ones) == Catch::Approx(expected).margin(1e-9));

    Tensor b = clamp01(Tensor::randn(Shape{3, 16, 16}, rng));
    REQUIRE(ssim(a, b) == Catch::Approx(ssim(b, a)).margin(1e-15));
    REQUIRE(ssim(a, b) < 1.0);
    REQUIRE(ssim(a, b) >= -1.0);

    REQUIRE_THROWS_AS(ssim(Tensor(Shape{3, 4, 4}), Tensor(Shape{3, 4, 4}), 8),
                      std::invalid_argument);

    // video-level mean over frames
    Tensor va = clamp01(Tensor::randn(Shape{2, 3, 16, 16}, rng));
    REQUIRE(ssim_video(va, va) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("lpips proxy: zero at identity, symmetric, monotone in noise") {
    LpipsFeatureNet net;
    Rng rng(3);
    Tensor a = clamp01(Tensor::randn(Shape{2, 3, 16, 16}, rng));
    REQUIRE(lpips_proxy(a, a, net) == 0.0);

    Tensor b = clamp01(Tensor::randn(Shape{2, 3, 16, 16}, rng));
    REQUIRE(lpips_proxy(a, b, net) == Catch::Approx(lpips_proxy(b, a, net)));
    REQUIRE(lpips_proxy(a, b, net) >= 0.0);

    // average distance strictly increases with noise strength
    const double sigmas[3] = {0.05, 0.1, 0.2};
    double avg[3] = {0, 0, 0};
    Rng noise_rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        for (int s = 0; s < 3; ++s) {
            Tensor noisy = a;
            for (std::int64_t i = 0; i < noisy.size(); ++i)
                noisy[i] = std::clamp(noisy[i] + sigmas[s] * noise_rng.normal(), 0.0, 1.0);
            avg[s] += lpips_proxy(a, noisy, net);
        }
    }
    REQUIRE(avg[0] < avg[1]);
    REQUIRE(avg[1] < avg[2]);

    // pinned seed -> identical nets
    LpipsFeatureNet net2;
    REQUIRE(lpips_proxy(a, b, net2) == lpips_proxy(a, b, net));
}

TEST_CASE("gaussian_stats: hand values and permutation invariance") {
    // two identical rows -> zero covariance
    Tensor same(Shape{2, 3}, std::vector<double>{1, 2, 3, 1, 2, 3});
    auto s0 = gaussian_stats(same);
    REQUIRE(s0.sigma.cwiseAbs().maxCoeff() == 0.0);

    // rows [0],[2]: mu=1, sample variance 2
    Tensor two(Shape{2, 1}, std::vector<double>{0.0, 2.0});
    auto s1 = gaussian_stats(two);
    REQUIRE(s1.mu(0) == Catch::Approx(1.0));
    REQUIRE(s1.sigma(0, 0) == Catch::Approx(2.0));

    Rng rng(5);
    Tensor rows = Tensor::randn(Shape{5, 4}, rng);
    Tensor shuffled(Shape{5, 4});
    const int order[5] = {3, 0, 4, 1, 2};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) shuffled.at2(i, j) = rows.at2(order[i], j);
    auto sa = gaussian_stats(rows);
    auto sb = gaussian_stats(shuffled);
    REQUIRE((sa.mu - sb.mu).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((sa.sigma - sb.sigma).cwiseAbs().maxCoeff() < 1e-12);

    REQUIRE_THROWS_AS(gaussian_stats(Tensor(Shape{1, 3})), std::invalid_argument);
}

namespace {
GaussianStats stats_1d(double mu, double var) {
    GaussianStats s;
    s.mu = Eigen::VectorXd::Constant(1, mu);
    s.sigma = Eigen::MatrixXd::Constant(1, 1, var);
    s.n = 2;
    return s;
}
}  // namespace

TEST_CASE("frechet distance: closed forms, identity, symmetry") {
    // N(0,1) vs N(1,1): (0-1)^2 + (1+1-2*1) = 1
    REQUIRE(frechet_distance(stats_1d(0, 1), stats_1d(1, 1)) == Catch::Approx(1.0).margin(1e-8));
    // N(0,1) vs N(0,4): 0 + (1+4-2*2) = 1
    REQUIRE(frechet_distance(stats_1d(0, 1), stats_1d(0, 4)) == Catch::Approx(1.0).margin(1e-8));

    Rng rng(6);
    Tensor feats = Tensor::randn(Shape{6, 3}, rng);
    auto s = gaussian_stats(feats);
    REQUIRE(frechet_distance(s, s) == Catch::Approx(0.0).margin(1e-8));

    auto s2 = gaussian_stats(Tensor::randn(Shape{6, 3}, rng));
    REQUIRE(frechet_distance(s, s2) ==
            Catch::Approx(frechet_distance(s2, s)).margin(1e-9));
    REQUIRE(frechet_distance(s, s2) >= 0.0);

    // diagonal closed form: sum (mu1-mu2)^2 + (sd1-sd2)^2
    Rng drng(7);
    GaussianStats d1, d2;
    d1.mu = Eigen::VectorXd::Random(4);
    d2.mu = Eigen::VectorXd::Random(4);
    Eigen::VectorXd v1 = Eigen::VectorXd::Random(4).cwiseAbs() + Eigen::VectorXd::Ones(4) * 0.1;
    Eigen::VectorXd v2 = Eigen::VectorXd::Random(4).cwiseAbs() + Eigen::VectorXd::Ones(4) * 0.1;
    d1.sigma = v1.asDiagonal();
    d2.sigma = v2.asDiagonal();
    d1.n = d2.n = 2;
    double expected = (d1.mu - d2.mu).squaredNorm();
    for (int i = 0; i < 4; ++i) {
        const double t = std::sqrt(v1(i)) - std::sqrt(v2(i));
        expected += t * t;
    }
    REQUIRE(frechet_distance(d1, d2) == Catch::Approx(expected).margin(1e-8));

    GaussianStats mismatched = stats_1d(0, 1);
    REQUIRE_THROWS_AS(frechet_distance(mismatched, d1), std::invalid_argument);
}

TEST_CASE("fvd: zero at identity, order invariance, monotone in corruption") {
    VideoFeatureNet net;
    Rng rng(8);
    std::vector<Tensor> real;
    for (int i = 0; i < 24; ++i)
        real.push_back(clamp01(Tensor::randn(Shape{3, 3, 16, 16}, rng) * 0.25 + Tensor(Shape{3, 3, 16, 16}, 0.5)));

    REQUIRE(fvd(real, real, net) == Catch::Approx(0.0).margin(1e-6));

    std::vector<Tensor> shuffled = real;
    std::rotate(shuffled.begin(), shuffled.begin() + 7, shuffled.end());
    std::vector<Tensor> light, strong;
    Rng noise(9);
    for (const auto& clip : real) {
        Tensor l = clip, s = clip;
        for (std::int64_t i = 0; i < clip.size(); ++i) {
            const double n1 = noise.normal(), n2 = noise.normal();
            l[i] = std::clamp(l[i] + 0.05 * n1, 0.0, 1.0);
            s[i] = std::clamp(s[i] + 0.30 * n2, 0.0, 1.0);
        }
        light.push_back(std::move(l));
        strong.push_back(std::move(s));
    }
    const double d_light = fvd(real, light, net);
    const double d_strong = fvd(real, strong, net);
    REQUIRE(d_light > 0.0);
    REQUIRE(d_strong > d_light);

    REQUIRE(fvd(shuffled, light, net) == Catch::Approx(fvd(real, light, net)).margin(1e-9));
    REQUIRE_THROWS_AS(fvd({}, real, net), std::invalid_argument);
}

TEST_CASE("metrics report serialization") {
    MetricsReport r;
    r.fvd = 12.5;
    r.psnr_db = 30.25;
    r.lpips = 0.125;
    r.ssim = 0.875;
    r.n_clips = 16;
    REQUIRE(r.all_finite());
    REQUIRE(metrics_csv_header() == "model,fvd,psnr,lpips,ssim,n_clips");
    REQUIRE(metrics_csv_row("toy", r) == "toy,12.5,30.25,0.125,0.875,16");
    auto j = r.to_json("toy");
    REQUIRE(j["model"] == "toy");
    REQUIRE(j["n_clips"] == 16);

    MetricsReport bad = r;
    bad.fvd = std::nan("");
    REQUIRE_FALSE(bad.all_finite());
}
