#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "causalegm/ad.hpp"
#include "causalegm/kernels.hpp"
#include "causalegm/mlp.hpp"
#include "causalegm/rng.hpp"
#include "testutil.hpp"

using namespace cegm;
using nn::Mlp;
using nn::MlpSpec;
using nn::Mode;
using testutil::fd_gradient;
using testutil::max_mismatch;
using testutil::random_mat;

namespace {
constexpr double kFdTol = 1e-5;
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(21);
    Mat A = random_mat(4, 3, rng), B = random_mat(3, 5, rng);
    Mat gA(4, 3), gB(3, 5);

    auto objective = [&] {
        Mat C(4, 5);
        kernels::matmul_nn(A, B, C);
        return kernels::sum_squares(C) / 4.0;
    };
    gA.fill(0);
    gB.fill(0);
    {
        ad::Tape t;
        auto* a = t.param(A, gA);
        auto* b = t.param(B, gB);
        auto* loss = t.mean_row_sumsq(t.matmul(a, b));
        t.backward(loss);
    }
    CHECK(max_mismatch(fd_gradient(A, objective), gA) < kFdTol);
    CHECK(max_mismatch(fd_gradient(B, objective), gB) < kFdTol);
}

TEST_CASE("affine, activations and reductions match finite differences") {
    Rng rng(22);
    Mat X = random_mat(6, 4, rng);
    Mat W = random_mat(4, 3, rng);
    Mat b = random_mat(1, 3, rng, 0.1);
    Mat target = random_mat(6, 3, rng);
    Mat gX(6, 4), gW(4, 3), gb(1, 3);

    auto build = [&](ad::Tape& t) {
        auto* x = t.param(X, gX);
        auto* w = t.param(W, gW);
        auto* bias = t.param(b, gb);
        auto* h = t.leaky_relu(t.affine(x, w, bias), 0.2);
        auto* s = t.sigmoid(h);
        auto* diff = t.sub(s, t.constant_ref(target));
        return t.add_scalars({t.mean_row_sumsq(diff), t.scale(t.mean_all(h), 0.7)});
    };
    auto objective = [&] {
        ad::Tape t;
        return build(t)->v()(0, 0);
    };
    gX.fill(0);
    gW.fill(0);
    gb.fill(0);
    {
        ad::Tape t;
        t.backward(build(t));
    }
    CHECK(max_mismatch(fd_gradient(X, objective), gX) < kFdTol);
    CHECK(max_mismatch(fd_gradient(W, objective), gW) < kFdTol);
    CHECK(max_mismatch(fd_gradient(b, objective), gb) < kFdTol);
}

TEST_CASE("slice and concat route gradients to the right columns") {
    Rng rng(23);
    Mat X = random_mat(5, 6, rng);
    Mat Y = random_mat(5, 2, rng);
    Mat gX(5, 6), gY(5, 2);

    auto build = [&](ad::Tape& t) {
        auto* x = t.param(X, gX);
        auto* y = t.param(Y, gY);
        auto* left = t.slice_cols(x, 0, 2);
        auto* right = t.slice_cols(x, 4, 6);
        auto* cat = t.concat_cols({left, y, right});
        return t.mean_row_sumsq(cat);
    };
    auto objective = [&] {
        ad::Tape t;
        return build(t)->v()(0, 0);
    };
    gX.fill(0);
    gY.fill(0);
    {
        ad::Tape t;
        t.backward(build(t));
    }
    CHECK(max_mismatch(fd_gradient(X, objective), gX) < kFdTol);
    CHECK(max_mismatch(fd_gradient(Y, objective), gY) < kFdTol);
    // middle columns of X are unused and must carry zero gradient
    for (int i = 0; i < 5; ++i) {
        CHECK(gX(i, 2) == 0.0);
        CHECK(gX(i, 3) == 0.0);
    }
}

TEST_CASE("batch-norm train mode gradients match finite differences") {
    Rng rng(24);
    Mat X = random_mat(8, 3, rng);
    Mat gamma = random_mat(1, 3, rng, 0.3);
    for (double& v : gamma.a) v += 1.0;
    Mat beta = random_mat(1, 3, rng, 0.2);
    Mat gX(8, 3), gG(1, 3), gB(1, 3);

    auto build = [&](ad::Tape& t) {
        auto* x = t.param(X, gX);
        auto* g = t.param(gamma, gG);
        auto* bt = t.param(beta, gB);
        auto* y = t.batchnorm_train(x, g, bt, nullptr, nullptr, 0.99, 1e-5, false);
        return t.mean_row_sumsq(t.leaky_relu(y, 0.2));
    };
    auto objective = [&] {
        ad::Tape t;
        return build(t)->v()(0, 0);
    };
    gX.fill(0);
    gG.fill(0);
    gB.fill(0);
    {
        ad::Tape t;
        t.backward(build(t));
    }
    CHECK(max_mismatch(fd_gradient(X, objective), gX) < 1e-4);
    CHECK(max_mismatch(fd_gradient(gamma, objective), gG) < kFdTol);
    CHECK(max_mismatch(fd_gradient(beta, objective), gB) < kFdTol);
}

TEST_CASE("batch-norm train mode standardizes each feature") {
    Rng rng(25);
    Mat X = random_mat(64, 5, rng, 3.0);
    Mat Z = nn::batchnorm_normalize(X, 1e-5);
    Mat mean(1, 5), var(1, 5);
    kernels::col_mean_var(Z, mean, var);
    for (int j = 0; j < 5; ++j) {
        CHECK(std::fabs(mean(0, j)) < 1e-10);
        CHECK(var(0, j) == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("batch-norm eval mode gradients match finite differences") {
    Rng rng(26);
    Mat X = random_mat(6, 3, rng);
    Mat gamma = Mat::full(1, 3, 1.3);
    Mat beta = random_mat(1, 3, rng, 0.2);
    Mat mean = random_mat(1, 3, rng, 0.5);
    Mat var = Mat::full(1, 3, 0.8);
    Mat gX(6, 3), gG(1, 3), gB(1, 3);

    auto build = [&](ad::Tape& t) {
        auto* x = t.param(X, gX);
        auto* g = t.param(gamma, gG);
        auto* bt = t.param(beta, gB);
        return t.mean_row_sumsq(t.batchnorm_eval(x, g, bt, mean, var, 1e-5));
    };
    auto objective = [&] {
        ad::Tape t;
        return build(t)->v()(0, 0);
    };
    gX.fill(0);
    gG.fill(0);
    gB.fill(0);
    {
        ad::Tape t;
        t.backward(build(t));
    }
    CHECK(max_mismatch(fd_gradient(X, objective), gX) < kFdTol);
    CHECK(max_mismatch(fd_gradient(gamma, objective), gG) < kFdTol);
    CHECK(max_mismatch(fd_gradient(beta, objective), gB) < kFdTol);
}

TEST_CASE("full network gradients match finite differences") {
    Rng rng(27);
    for (bool bn : {false, true}) {
        CAPTURE(bn);
        MlpSpec spec;
        spec.layer_sizes = {3, 4, 3, 1};
        spec.batch_norm = bn;
        Mlp net = Mlp::init(spec, 99);
        Mat X = random_mat(7, 3, rng);
        Mat Y = random_mat(7, 1, rng);

        auto build = [&](ad::Tape& t) {
            auto tied = nn::tie(t, net, true);
            auto* pred =
                nn::build_forward(t, tied, t.constant_ref(X), Mode::train, false, 0.99);
            return t.mean_row_sumsq(t.sub(t.constant_ref(Y), pred));
        };
        auto objective = [&] {
            ad::Tape t;
            return build(t)->v()(0, 0);
        };
        const double worst = testutil::fd_check_params(
            {&net}, objective,
            [&] {
                ad::Tape t;
                t.backward(build(t));
            });
        CHECK(worst < kFdTol);
    }
}

TEST_CASE("input_gradient matches finite differences of the forward pass") {
    Rng rng(28);
    for (bool bn : {false, true}) {
        CAPTURE(bn);
        MlpSpec spec;
        spec.layer_sizes = {4, 5, 3, 1};
        spec.batch_norm = bn;
        Mlp net = Mlp::init(spec, 31);
        if (bn) {
            // move running stats off their initial values
            for (auto& layer : net.layers)
                if (layer.has_bn())
                    for (int j = 0; j < layer.run_mean.cols; ++j) {
                        layer.run_mean(0, j) = 0.1 * j - 0.2;
                        layer.run_var(0, j) = 0.7 + 0.1 * j;
                    }
        }
        Mat X = random_mat(6, 4, rng);
        Mat G = net.input_gradient(X);
        for (int i = 0; i < X.rows; ++i)
            for (int j = 0; j < X.cols; ++j) {
                const double h = 1e-6;
                const double saved = X(i, j);
                X(i, j) = saved + h;
                const double fp = testutil::naive_forward(net, X, false)(i, 0);
                X(i, j) = saved - h;
                const double fm = testutil::naive_forward(net, X, false)(i, 0);
                X(i, j) = saved;
                CHECK(testutil::close(G(i, j), (fp - fm) / (2 * h), 1e-4));
            }
    }
}

TEST_CASE("input_gradient requires a scalar output") {
    MlpSpec spec;
    spec.layer_sizes = {3, 4, 2};
    Mlp net = Mlp::init(spec, 1);
    Mat X(2, 3);
    CHECK_THROWS_AS(net.input_gradient(X), ContractError);
}

TEST_CASE("gradient penalty value and closed forms") {
    // critic with a single linear layer: D(z) = z w + b, so the penalty is
    // (||w|| - 1)^2 independent of the evaluation points
    MlpSpec spec;
    spec.layer_sizes = {3, 1};
    Mlp net = Mlp::init(spec, 5);
    net.layers[0].W(0, 0) = 0.6;
    net.layers[0].W(1, 0) = 0.0;
    net.layers[0].W(2, 0) = 0.8;  // unit norm
    Rng rng(30);
    Mat zhat = random_mat(9, 3, rng);
    {
        ad::Tape t;
        auto tied = nn::tie(t, net, true);
        auto* p = nn::gradient_penalty(t, tied, zhat, net.snapshot_running_stats());
        CHECK(p->v()(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
    }
    net.layers[0].W(0, 0) = 1.5;
    net.layers[0].W(1, 0) = 0.0;
    net.layers[0].W(2, 0) = 2.0;  // norm 2.5
    net.zero_grads();
    {
        ad::Tape t;
        auto tied = nn::tie(t, net, true);
        auto* p = nn::gradient_penalty(t, tied, zhat, net.snapshot_running_stats());
        CHECK(p->v()(0, 0) == doctest::Approx(2.25).epsilon(1e-12));
        t.backward(p);
    }
    // analytic: 2 (||w|| - 1) w / ||w||
    CHECK(net.grads[0].W(0, 0) == doctest::Approx(2 * 1.5 * 1.5 / 2.5).epsilon(1e-12));
    CHECK(net.grads[0].W(1, 0) == doctest::Approx(0.0));
    CHECK(net.grads[0].W(2, 0) == doctest::Approx(2 * 1.5 * 2.0 / 2.5).epsilon(1e-12));
    CHECK(net.grads[0].b(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("gradient penalty parameter gradients match finite differences") {
    Rng rng(33);
    for (bool bn : {false, true}) {
        CAPTURE(bn);
        MlpSpec spec;
        spec.layer_sizes = {3, 4, 3, 1};
        spec.batch_norm = bn;
        Mlp net = Mlp::init(spec, 77);
        if (bn)
            for (auto& layer : net.layers)
                if (layer.has_bn())
                    for (int j = 0; j < layer.run_mean.cols; ++j) {
                        layer.run_mean(0, j) = 0.05 * (j + 1);
                        layer.run_var(0, j) = 0.9 + 0.05 * j;
                    }
        Mat zhat = random_mat(8, 3, rng);
        const nn::BnSnapshot stats = net.snapshot_running_stats();

        auto objective = [&] {
            ad::Tape t;
            auto tied = nn::tie(t, net, true);
            return nn::gradient_penalty(t, tied, zhat, stats)->v()(0, 0);
        };
        const double worst = testutil::fd_check_params(
            {&net}, objective,
            [&] {
                ad::Tape t;
                auto tied = nn::tie(t, net, true);
                t.backward(nn::gradient_penalty(t, tied, zhat, stats));
            });
        CHECK(worst < kFdTol);
    }
}

TEST_CASE("gradients accumulate when a parameter is used twice") {
    Rng rng(40);
    Mat W = random_mat(3, 3, rng);
    Mat X = random_mat(4, 3, rng);
    Mat gW(3, 3);

    auto build = [&](ad::Tape& t) {
        auto* w = t.param(W, gW);
        auto* x = t.constant_ref(X);
        auto* once = t.matmul(x, w);
        auto* twice = t.matmul(once, w);
        return t.mean_row_sumsq(twice);
    };
    auto objective = [&] {
        ad::Tape t;
        return build(t)->v()(0, 0);
    };
    gW.fill(0);
    {
        ad::Tape t;
        t.backward(build(t));
    }
    CHECK(max_mismatch(fd_gradient(W, objective), gW) < kFdTol);
}

TEST_CASE("backward requires a scalar loss") {
    ad::Tape t;
    Mat X(2, 2);
    auto* x = t.constant_ref(X);
    CHECK_THROWS_AS(t.backward(x), ShapeError);
}
