#pragma once

// shared helpers for the test suite: finite-difference oracles and naive
// reference implementations kept deliberately independent of the library's
// compute paths

#include <cmath>
#include <functional>
#include <vector>

#include "causalegm/mat.hpp"
#include "causalegm/mlp.hpp"
#include "causalegm/rng.hpp"

namespace testutil {

using cegm::Mat;

// |a - b| <= tol * max(1, |a|, |b|)
inline bool close(double a, double b, double tol) {
    const double scale = std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
    return std::fabs(a - b) <= tol * scale;
}

// central-difference gradient of a scalar objective with respect to every
// entry of m; the objective must be a pure function of m
inline Mat fd_gradient(Mat& m, const std::function<double()>& objective, double h = 1e-5) {
    Mat g(m.rows, m.cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double saved = m.a[i];
        m.a[i] = saved + h;
        const double fp = objective();
        m.a[i] = saved - h;
        const double fm = objective();
        m.a[i] = saved;
        g.a[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double max_mismatch(const Mat& a, const Mat& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(1.0, std::max(std::fabs(a.a[i]), std::fabs(b.a[i])));
        worst = std::max(worst, std::fabs(a.a[i] - b.a[i]) / scale);
    }
    return worst;
}

inline Mat random_mat(int r, int c, cegm::Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& v : m.a) v = scale * rng.normal();
    return m;
}

// plain-loop forward pass used as a reference against the library's
// kernel-based forward; batch norm uses running statistics
inline Mat naive_forward(const cegm::nn::Mlp& net, const Mat& x, bool apply_output_act = true) {
    using cegm::nn::OutputActivation;
    const int L = net.spec.num_layers();
    Mat a = x;
    for (int l = 0; l < L; ++l) {
        const auto& layer = net.layers[l];
        Mat h(a.rows, layer.W.cols);
        for (int i = 0; i < a.rows; ++i)
            for (int j = 0; j < layer.W.cols; ++j) {
                double s = layer.b(0, j);
                for (int k = 0; k < a.cols; ++k) s += a(i, k) * layer.W(k, j);
                h(i, j) = s;
            }
        if (l < L - 1) {
            if (layer.has_bn()) {
                for (int j = 0; j < h.cols; ++j) {
                    const double istd = 1.0 / std::sqrt(layer.run_var(0, j) + net.spec.bn_eps);
                    for (int i = 0; i < h.rows; ++i)
                        h(i, j) = layer.gamma(0, j) * (h(i, j) - layer.run_mean(0, j)) * istd +
                                  layer.beta(0, j);
                }
            }
            for (double& v : h.a)
                if (v < 0.0) v *= net.spec.leaky_slope;
        }
        a = std::move(h);
    }
    if (apply_output_act && net.spec.output_activation == OutputActivation::sigmoid)
        for (double& v : a.a) v = 1.0 / (1.0 + std::exp(-v));
    return a;
}

// FD check of an analytic gradient for every trainable parameter of a set of
// networks against a pure scalar objective; returns the worst relative error
inline double fd_check_params(std::vector<cegm::nn::Mlp*> nets,
                              const std::function<double()>& objective,
                              const std::function<void()>& compute_grads, double h = 1e-5) {
    for (auto* net : nets) net->zero_grads();
    compute_grads();
    double worst = 0.0;
    for (auto* net : nets) {
        for (auto [p, g] : net->param_grad_pairs()) {
            Mat fd = fd_gradient(*p, objective, h);
            worst = std::max(worst, max_mismatch(fd, *g));
        }
    }
    return worst;
}

}  // namespace testutil
