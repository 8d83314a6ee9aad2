#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "grad_check.hpp"
#include "tridiff/diffusion/loss.hpp"
#include "tridiff/model/denoiser.hpp"

using namespace tridiff;

namespace {

DenoiserConfig small_config(bool temporal) {
    DenoiserConfig cfg;
    cfg.latent_channels = 2;
    cfg.base_channels = 4;
    cfg.depth = 2;
    cfg.cond_dim = 3;
    cfg.time_embed_dim = 4;
    cfg.temporal_enabled = temporal;
    return cfg;
}

}  // namespace

TEST_CASE("denoiser output matches input shape and stays finite") {
    for (bool temporal : {false, true}) {
        DenoiserNet net(small_config(temporal), Rng(1));
        Rng rng(2);
        Tensor z = Tensor::randn(Shape{5, 2, 6, 6}, rng);
        Tensor cond = Tensor::randn(Shape{3}, rng);
        Tensor out = net.forward_plain(z, 7, cond);
        REQUIRE(out.shape() == z.shape());
        REQUIRE(out.all_finite());
    }
}

TEST_CASE("denoiser rejects wrong conditioning width and latent channels") {
    DenoiserNet net(small_config(true), Rng(1));
    Rng rng(3);
    Tensor z = Tensor::randn(Shape{2, 2, 4, 4}, rng);
    REQUIRE_THROWS_AS(net.forward_plain(z, 1, Tensor(Shape{5})), std::invalid_argument);
    REQUIRE_THROWS_AS(net.forward_plain(Tensor(Shape{2, 3, 4, 4}), 1, Tensor(Shape{3})),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(DenoiserNet(DenoiserConfig{.depth = 0}, Rng(0)), std::invalid_argument);
}

TEST_CASE("denoiser is deterministic given parameters") {
    DenoiserNet net(small_config(true), Rng(4));
    Rng rng(5);
    Tensor z = Tensor::randn(Shape{3, 2, 4, 4}, rng);
    Tensor cond = Tensor::randn(Shape{3}, rng);
    REQUIRE(net.forward_plain(z, 3, cond).vec() == net.forward_plain(z, 3, cond).vec());
}

TEST_CASE("without temporal layers, frames are processed independently") {
    DenoiserNet net(small_config(false), Rng(6));
    Rng rng(7);
    Tensor z = Tensor::randn(Shape{4, 2, 4, 4}, rng);
    Tensor cond = Tensor::randn(Shape{3}, rng);
    Tensor base = net.forward_plain(z, 5, cond);

    // perturb frame 1 only
    Tensor z2 = z;
    const std::int64_t fs = z.size() / 4;
    for (std::int64_t i = 0; i < fs; ++i) z2[fs + i] += 0.5;
    Tensor out = net.forward_plain(z2, 5, cond);

    for (int f = 0; f < 4; ++f) {
        double diff = 0.0;
        for (std::int64_t i = 0; i < fs; ++i) diff += std::fabs(out[f * fs + i] - base[f * fs + i]);
        if (f == 1)
            REQUIRE(diff > 0.0);
        else
            REQUIRE(diff == 0.0);  // exact independence
    }
}

TEST_CASE("with temporal layers, a frame perturbation reaches other frames") {
    DenoiserNet net(small_config(true), Rng(8));
    Rng rng(9);
    Tensor z = Tensor::randn(Shape{4, 2, 4, 4}, rng);
    Tensor cond = Tensor::randn(Shape{3}, rng);
    Tensor base = net.forward_plain(z, 5, cond);

    Tensor z2 = z;
    const std::int64_t fs = z.size() / 4;
    for (std::int64_t i = 0; i < fs; ++i) z2[fs + i] += 0.5;
    Tensor out = net.forward_plain(z2, 5, cond);

    double cross = 0.0;
    for (int f = 0; f < 4; ++f) {
        if (f == 1) continue;
        for (std::int64_t i = 0; i < fs; ++i)
            cross = std::max(cross, std::fabs(out[f * fs + i] - base[f * fs + i]));
    }
    REQUIRE(cross > 0.0);
}

TEST_CASE("conditioning vector changes the prediction") {
    DenoiserNet net(small_config(true), Rng(10));
    Rng rng(11);
    Tensor z = Tensor::randn(Shape{2, 2, 4, 4}, rng);
    Tensor c1 = Tensor::randn(Shape{3}, rng);
    Tensor c2 = Tensor::randn(Shape{3}, rng);
    Tensor a = net.forward_plain(z, 3, c1);
    Tensor b = net.forward_plain(z, 3, c2);
    double diff = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) diff += std::fabs(a[i] - b[i]);
    REQUIRE(diff > 0.0);
}

TEST_CASE("training loss gradient matches finite differences on a <=100 parameter denoiser") {
    DenoiserConfig cfg;
    cfg.latent_channels = 1;
    cfg.base_channels = 1;
    cfg.depth = 1;
    cfg.cond_dim = 2;
    cfg.time_embed_dim = 4;
    cfg.temporal_enabled = true;
    DenoiserNet net(cfg, Rng(12));
    REQUIRE(net.param_count() <= 100);

    Rng data_rng(13);
    Tensor x = Tensor::randn(Shape{2, 1, 3, 3}, data_rng);
    Tensor cond = Tensor::randn(Shape{2}, data_rng);
    auto sched = make_linear_schedule(30, 1e-2, 0.1);

    auto build = [&](Tape& tape) {
        DenoiseFn model = [&net](Tape& t, Var z_t, int t_step, Var c) {
            return net.forward(t, z_t, t_step, c);
        };
        Rng loss_rng(777);
        return training_loss_on_tape(tape, x, tape.constant(cond), model, sched, loss_rng);
    };

    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
    std::vector<Param*> params;
    net.collect(params);
    std::vector<Tensor> analytic;
    for (Param* p : params) {
        const Tensor* g = tape.grad_for(*p);
        analytic.push_back(g ? *g : Tensor());
    }
    auto value = [&]() {
        Tape t2;
        return t2.value(build(t2))[0];
    };
    auto res = testing::finite_difference_check(params, analytic, value);
    INFO("checked " << res.checked << " params, worst " << res.worst_param);
    REQUIRE(res.max_rel_err < 1e-4);
}
