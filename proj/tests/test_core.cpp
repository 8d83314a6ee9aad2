#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "grad_check.hpp"
#include "tridiff/core/adam.hpp"
#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/serialize.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

using namespace tridiff;

TEST_CASE("tensor shape and arithmetic basics") {
    Tensor t(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    REQUIRE(t.size() == 6);
    REQUIRE(t.at2(1, 2) == 6);
    REQUIRE_THROWS_AS(t.reshaped(Shape{4, 2}), std::invalid_argument);
    REQUIRE(t.reshaped(Shape{3, 2}).dim(0) == 3);

    Tensor a(Shape{2}, std::vector<double>{1.0, 2.0});
    Tensor b(Shape{2}, std::vector<double>{0.5, 0.5});
    REQUIRE(mse(a, b) == Catch::Approx((0.25 + 2.25) / 2.0));
    REQUIRE_THROWS_AS(mse(a, Tensor(Shape{3})), std::invalid_argument);

    Tensor c(Shape{3}, std::vector<double>{-0.5, 0.5, 1.5});
    Tensor cc = clamp01(c);
    REQUIRE(cc[0] == 0.0);
    REQUIRE(cc[1] == 0.5);
    REQUIRE(cc[2] == 1.0);
}

TEST_CASE("rng is deterministic and derive is order-independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.normal() == b.normal());

    Rng base(7);
    Rng c1 = base.derive(3);
    base.uniform();  // advancing the parent must not change derived streams
    Rng c2 = base.derive(3);
    for (int i = 0; i < 10; ++i) REQUIRE(c1.uniform() == c2.uniform());

    // distinct streams
    Rng d1 = base.derive(1), d2 = base.derive(2);
    REQUIRE(d1.uniform() != d2.uniform());
}

TEST_CASE("rng normal moments") {
    Rng rng(123);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    REQUIRE(std::fabs(s / n) < 0.01);
    REQUIRE(std::fabs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("rng uniform_int covers range uniformly") {
    Rng rng(5);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) {
        const auto v = rng.uniform_int(2, 6);
        REQUIRE(v >= 2);
        REQUIRE(v <= 6);
        ++counts[static_cast<size_t>(v - 2)];
    }
    for (int c : counts) REQUIRE(c > 800);
}

namespace {

// Runs a finite-difference check of `loss` (a fresh-forward evaluator)
// against the tape gradients produced by `run_tape`.
void expect_grads_match(std::vector<Param*> params,
                        const std::function<Var(Tape&)>& build,
                        double tol = 2e-6) {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
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
    INFO("worst " << res.worst_param << ": analytic=" << res.worst_analytic
                  << " numeric=" << res.worst_numeric);
    REQUIRE(res.max_rel_err < tol);
}

}  // namespace

TEST_CASE("autograd elementwise and reduction ops match finite differences") {
    Rng rng(11);
    Param a{"a", Tensor::randn(Shape{3, 4}, rng)};
    Param b{"b", Tensor::randn(Shape{3, 4}, rng)};
    Tensor target = Tensor::randn(Shape{3, 4}, rng);

    expect_grads_match({&a, &b}, [&](Tape& t) {
        Var va = t.param(a), vb = t.param(b);
        Var x = t.mul(t.add(va, vb), t.sub(va, vb));
        x = t.silu(t.scale(x, 0.7));
        x = t.sigmoid(x);
        return t.mse_to(x, target);
    });

    expect_grads_match({&a}, [&](Tape& t) {
        return t.mean_all(t.mul(t.param(a), t.param(a)));
    });

    expect_grads_match({&a}, [&](Tape& t) {
        Var pooled = t.mean_axis0(t.param(a));  // (4,)
        return t.mse_to(pooled, Tensor(Shape{4}, 0.3));
    });
}

TEST_CASE("autograd matmul / bmm / linear / biases match finite differences") {
    Rng rng(13);
    Param w{"w", Tensor::randn(Shape{4, 3}, rng)};
    Param x{"x", Tensor::randn(Shape{2, 4}, rng)};
    Param bias{"bias", Tensor::randn(Shape{3}, rng)};

    expect_grads_match({&w, &x, &bias}, [&](Tape& t) {
        Var y = t.add_row_bias(t.matmul(t.param(x), t.param(w)), t.param(bias));
        return t.mean_all(t.mul(y, y));
    });

    Param bm1{"bm1", Tensor::randn(Shape{2, 3, 4}, rng)};
    Param bm2{"bm2", Tensor::randn(Shape{2, 4, 2}, rng)};
    expect_grads_match({&bm1, &bm2}, [&](Tape& t) {
        Var y = t.bmm(t.param(bm1), t.param(bm2));
        return t.mean_all(t.mul(y, y));
    });

    Param cb{"cb", Tensor::randn(Shape{3}, rng)};
    Param img{"img", Tensor::randn(Shape{2, 3, 4, 4}, rng)};
    expect_grads_match({&cb, &img}, [&](Tape& t) {
        Var y = t.add_channel_bias(t.param(img), t.param(cb));
        return t.mean_all(t.mul(y, y));
    });
}

TEST_CASE("autograd softmax / permute / stack / concat / embed match finite differences") {
    Rng rng(17);
    Param logits{"logits", Tensor::randn(Shape{3, 5}, rng)};
    Tensor target(Shape{3, 5}, 0.2);
    expect_grads_match({&logits}, [&](Tape& t) {
        return t.mse_to(t.softmax_lastdim(t.param(logits)), target);
    });

    Param p4{"p4", Tensor::randn(Shape{2, 3, 2, 2}, rng)};
    expect_grads_match({&p4}, [&](Tape& t) {
        Var y = t.permute(t.param(p4), {2, 0, 3, 1});
        y = t.reshape(y, Shape{4, 6});
        return t.mean_all(t.mul(y, y));
    });

    Param r1{"r1", Tensor::randn(Shape{4}, rng)};
    Param r2{"r2", Tensor::randn(Shape{4}, rng)};
    expect_grads_match({&r1, &r2}, [&](Tape& t) {
        Var stacked = t.stack_rows({t.param(r1), t.param(r2), t.param(r1)});
        Var cat = t.concat_vec(t.mean_axis0(stacked), t.param(r2));
        return t.mse_to(cat, Tensor(Shape{8}, 0.1));
    });

    Param table{"table", Tensor::randn(Shape{6, 3}, rng)};
    expect_grads_match({&table}, [&](Tape& t) {
        Var row = t.embed_row(t.param(table), 2);
        Var again = t.embed_row(t.param(table), 2);  // reuse accumulates
        return t.mse_to(t.add(row, again), Tensor(Shape{3}, 0.5));
    });
}

TEST_CASE("autograd conv2d and upsample match finite differences") {
    Rng rng(19);
    for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
        Param x{"x", Tensor::randn(Shape{2, 2, 5, 5}, rng)};
        Param w{"w", Tensor::randn(Shape{3, 2, 3, 3}, rng)};
        Param b{"b", Tensor::randn(Shape{3}, rng)};
        expect_grads_match({&x, &w, &b}, [&, stride = stride, pad = pad](Tape& t) {
            Var y = t.conv2d(t.param(x), t.param(w), t.param(b), stride, pad);
            return t.mean_all(t.mul(y, y));
        });
    }

    Param x{"x", Tensor::randn(Shape{1, 2, 3, 3}, rng)};
    expect_grads_match({&x}, [&](Tape& t) {
        Var y = t.upsample_nearest2x(t.param(x));
        return t.mean_all(t.mul(y, y));
    });
}

TEST_CASE("attention helper: rows sum to one and grads flow") {
    Rng rng(23);
    Param q{"q", Tensor::randn(Shape{3, 4}, rng)};
    Param k{"k", Tensor::randn(Shape{5, 4}, rng)};
    Param v{"v", Tensor::randn(Shape{5, 4}, rng)};

    Tape tape;
    auto att = scaled_dot_attention(tape, tape.param(q), tape.param(k), tape.param(v));
    const Tensor& wts = tape.value(att.weights);
    for (int i = 0; i < 3; ++i) {
        double row = 0.0;
        for (int j = 0; j < 5; ++j) row += wts.at2(i, j);
        REQUIRE(row == Catch::Approx(1.0).margin(1e-12));
    }

    expect_grads_match({&q, &k, &v}, [&](Tape& t) {
        auto a = scaled_dot_attention(t, t.param(q), t.param(k), t.param(v));
        return t.mean_all(t.mul(a.out, a.out));
    });
}

TEST_CASE("parameter reuse on one tape accumulates gradients") {
    Rng rng(29);
    Param w{"w", Tensor::randn(Shape{3, 3}, rng)};
    Param x{"x", Tensor::randn(Shape{2, 3}, rng)};
    // y = (x W) W : W used twice
    expect_grads_match({&w, &x}, [&](Tape& t) {
        Var y = t.matmul(t.matmul(t.param(x), t.param(w)), t.param(w));
        return t.mean_all(t.mul(y, y));
    });
}

TEST_CASE("adam takes a step and clips the global norm") {
    Param p{"p", Tensor(Shape{2}, std::vector<double>{1.0, 1.0})};
    Adam opt({&p}, 0.1, 0.9, 0.999, 1e-8, /*clip=*/1.0);
    Tensor g(Shape{2}, std::vector<double>{30.0, 40.0});  // norm 50 -> scaled by 1/50
    std::vector<const Tensor*> grads{&g};
    opt.step(grads);
    // After clipping, g_hat = (0.6, 0.8); first Adam step moves by
    // lr * g_hat / (|g_hat| + eps) elementwise ~= lr * sign
    REQUIRE(p.value[0] < 1.0);
    REQUIRE(p.value[1] < 1.0);
    REQUIRE(std::fabs((1.0 - p.value[0]) - 0.1) < 1e-3);
    REQUIRE(std::fabs((1.0 - p.value[1]) - 0.1) < 1e-3);
}

TEST_CASE("checkpoint round trip preserves values and metadata") {
    Rng rng(31);
    Param a{"enc.w", Tensor::randn(Shape{3, 4}, rng)};
    Param b{"enc.b", Tensor::randn(Shape{4}, rng)};
    nlohmann::json meta{{"kind", "unit-test"}, {"seed", 31}};

    const auto path = std::filesystem::temp_directory_path() / "tridiff_ckpt_test.bin";
    ckpt::save(path.string(), meta, {&a, &b});

    Param a2{"enc.w", Tensor(Shape{3, 4})};
    Param b2{"enc.b", Tensor(Shape{4})};
    auto meta2 = ckpt::load(path.string(), {&a2, &b2});
    REQUIRE(meta2["kind"] == "unit-test");
    REQUIRE(a2.value.vec() == a.value.vec());
    REQUIRE(b2.value.vec() == b.value.vec());

    Param wrong{"enc.w", Tensor(Shape{4, 3})};
    REQUIRE_THROWS_AS(ckpt::load(path.string(), {&wrong}), std::runtime_error);
    Param missing{"other", Tensor(Shape{2})};
    REQUIRE_THROWS_AS(ckpt::load(path.string(), {&missing}), std::runtime_error);
    std::filesystem::remove(path);
}
