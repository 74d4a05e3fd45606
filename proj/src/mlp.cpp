#include "causalegm/mlp.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "causalegm/kernels.hpp"
#include "causalegm/rng.hpp"

namespace cegm::nn {

using kernels::col_sum;
using kernels::matmul_nn;
using kernels::matmul_nt;
using kernels::matmul_tn;

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw ConfigError("MlpSpec: need at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw ConfigError("MlpSpec: layer sizes must be positive");
    if (!(leaky_slope >= 0.0) || leaky_slope >= 1.0)
        throw ConfigError("MlpSpec: leaky_slope must lie in [0, 1)");
}

Mlp Mlp::init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Mlp net;
    net.spec = spec;
    Rng rng(seed);
    const int L = spec.num_layers();
    net.layers.resize(L);
    net.grads.resize(L);
    for (int l = 0; l < L; ++l) {
        const int fan_in = spec.layer_sizes[l];
        const int fan_out = spec.layer_sizes[l + 1];
        Layer& layer = net.layers[l];
        layer.W = Mat(fan_in, fan_out);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : layer.W.a) w = rng.uniform(-limit, limit);
        layer.b = Mat(1, fan_out);
        const bool hidden = l < L - 1;
        if (hidden && spec.batch_norm) {
            layer.gamma = Mat::full(1, fan_out, 1.0);
            layer.beta = Mat(1, fan_out);
            layer.run_mean = Mat(1, fan_out);
            layer.run_var = Mat::full(1, fan_out, 1.0);
        }
        Layer& g = net.grads[l];
        g.W = Mat(fan_in, fan_out);
        g.b = Mat(1, fan_out);
        if (layer.has_bn()) {
            g.gamma = Mat(1, fan_out);
            g.beta = Mat(1, fan_out);
        }
    }
    return net;
}

namespace {

void apply_bn_affine(Mat& h, const Mat& gamma, const Mat& beta, const Mat& mean, const Mat& var,
                     double eps) {
    const int n = h.rows, d = h.cols;
    for (int j = 0; j < d; ++j) {
        const double istd = 1.0 / std::sqrt(var(0, j) + eps);
        const double g = gamma(0, j), bt = beta(0, j), mu = mean(0, j);
        for (int i = 0; i < n; ++i) h(i, j) = g * (h(i, j) - mu) * istd + bt;
    }
}

}  // namespace

Mat Mlp::forward_pre_output(const Mat& x, Mode mode) const {
    if (x.cols != spec.input_dim())
        throw ShapeError("forward: input has " + std::to_string(x.cols) + " columns, expected " +
                         std::to_string(spec.input_dim()));
    const int L = spec.num_layers();
    Mat a = x;
    for (int l = 0; l < L; ++l) {
        const Layer& layer = layers[l];
        Mat h(a.rows, layer.W.cols);
        matmul_nn(a, layer.W, h);
        kernels::add_bias_rows(h, layer.b);
        if (l < L - 1) {
            if (layer.has_bn()) {
                if (mode == Mode::train) {
                    Mat mean(1, h.cols), var(1, h.cols);
                    kernels::col_mean_var(h, mean, var);
                    apply_bn_affine(h, layer.gamma, layer.beta, mean, var, spec.bn_eps);
                } else {
                    apply_bn_affine(h, layer.gamma, layer.beta, layer.run_mean, layer.run_var,
                                    spec.bn_eps);
                }
            }
            kernels::leaky_relu_fwd(h, spec.leaky_slope, h);
        }
        a = std::move(h);
    }
    return a;
}

Mat Mlp::forward(const Mat& x, Mode mode) const {
    Mat out = forward_pre_output(x, mode);
    if (spec.output_activation == OutputActivation::sigmoid) kernels::sigmoid_fwd(out, out);
    return out;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) {
        n += l.W.size() + l.b.size();
        if (l.has_bn()) n += l.gamma.size() + l.beta.size();
    }
    return n;
}

void Mlp::zero_grads() {
    for (Layer& g : grads) {
        g.W.fill(0.0);
        g.b.fill(0.0);
        if (!g.gamma.empty()) {
            g.gamma.fill(0.0);
            g.beta.fill(0.0);
        }
    }
}

std::vector<std::pair<Mat*, Mat*>> Mlp::param_grad_pairs() {
    std::vector<std::pair<Mat*, Mat*>> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.emplace_back(&layers[l].W, &grads[l].W);
        out.emplace_back(&layers[l].b, &grads[l].b);
        if (layers[l].has_bn()) {
            out.emplace_back(&layers[l].gamma, &grads[l].gamma);
            out.emplace_back(&layers[l].beta, &grads[l].beta);
        }
    }
    return out;
}

std::vector<std::pair<const Mat*, const Mat*>> Mlp::param_grad_pairs() const {
    std::vector<std::pair<const Mat*, const Mat*>> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.emplace_back(&layers[l].W, &grads[l].W);
        out.emplace_back(&layers[l].b, &grads[l].b);
        if (layers[l].has_bn()) {
            out.emplace_back(&layers[l].gamma, &grads[l].gamma);
            out.emplace_back(&layers[l].beta, &grads[l].beta);
        }
    }
    return out;
}

BnSnapshot Mlp::snapshot_running_stats() const {
    BnSnapshot s;
    for (const Layer& l : layers) {
        if (l.has_bn()) {
            s.mean.push_back(l.run_mean);
            s.var.push_back(l.run_var);
        }
    }
    return s;
}

TiedMlp tie(ad::Tape& tape, Mlp& net, bool trainable) {
    TiedMlp tied;
    tied.net = &net;
    tied.trainable = trainable;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        Layer& g = net.grads[l];
        TiedLayer t;
        if (trainable) {
            t.W = tape.param(layer.W, g.W);
            t.b = tape.param(layer.b, g.b);
            if (layer.has_bn()) {
                t.gamma = tape.param(layer.gamma, g.gamma);
                t.beta = tape.param(layer.beta, g.beta);
            }
        } else {
            t.W = tape.constant_ref(layer.W);
            t.b = tape.constant_ref(layer.b);
            if (layer.has_bn()) {
                t.gamma = tape.constant_ref(layer.gamma);
                t.beta = tape.constant_ref(layer.beta);
            }
        }
        tied.layers.push_back(t);
    }
    return tied;
}

ad::Node* build_forward(ad::Tape& tape, const TiedMlp& tied, ad::Node* x, Mode mode,
                        bool update_running, double bn_momentum,
                        bool apply_output_activation) {
    const Mlp& net = *tied.net;
    const int L = net.spec.num_layers();
    ad::Node* a = x;
    for (int l = 0; l < L; ++l) {
        const TiedLayer& t = tied.layers[l];
        ad::Node* h = tape.affine(a, t.W, t.b);
        if (l < L - 1) {
            if (net.layers[l].has_bn()) {
                Layer& layer = tied.net->layers[l];
                if (mode == Mode::train)
                    h = tape.batchnorm_train(h, t.gamma, t.beta, &layer.run_mean, &layer.run_var,
                                             bn_momentum, net.spec.bn_eps, update_running);
                else
                    h = tape.batchnorm_eval(h, t.gamma, t.beta, layer.run_mean, layer.run_var,
                                            net.spec.bn_eps);
            }
            h = tape.leaky_relu(h, net.spec.leaky_slope);
        }
        a = h;
    }
    if (apply_output_activation && net.spec.output_activation == OutputActivation::sigmoid)
        a = tape.sigmoid(a);
    return a;
}

Mat batchnorm_normalize(const Mat& x, double eps) {
    Mat mean(1, x.cols), var(1, x.cols);
    kernels::col_mean_var(x, mean, var);
    Mat out(x.rows, x.cols);
    for (int j = 0; j < x.cols; ++j) {
        const double istd = 1.0 / std::sqrt(var(0, j) + eps);
        for (int i = 0; i < x.rows; ++i) out(i, j) = (x(i, j) - mean(0, j)) * istd;
    }
    return out;
}

// === gradient of the scalar critic output with respect to its input ===
//
// For hidden layer h (0-based, output layer is index L-1):
//   pre_h = a_h W_h + b_h
//   o_h   = gamma_h .* (pre_h - mean_h) .* istd_h + beta_h   (when BN, affine in pre_h)
//   a_h+1 = leaky(o_h)
// The row-wise input gradient is obtained by the backward sweep
//   u_{L-2} = ones * W_{L-1}^T
//   m_h = leaky'(o_h) .* (gamma_h .* istd_h)      (factor 1 without BN)
//   v_h = u_h .* m_h,   u_{h-1} = v_h W_h^T,   g = v_0 W_0^T
// All caches below are retained because the penalty's backward pass reuses
// them.
namespace {

struct CriticSweep {
    std::vector<Mat> preact;  // o_h per hidden layer
    std::vector<Mat> act;     // a_0 .. a_{L-1}
    std::vector<Mat> cfac;    // 1 x d: gamma .* istd per hidden layer (empty if no BN)
    std::vector<Mat> istd;    // 1 x d per hidden layer (empty if no BN)
    std::vector<Mat> u, m, vv;
    Mat out;  // n x 1
    Mat g;    // n x d_in
};

void critic_forward(const Mlp& net, const Mat& x, const BnSnapshot* stats, CriticSweep& cs) {
    const double bn_eps = net.spec.bn_eps;
    const int L = net.spec.num_layers();
    cs.act.clear();
    cs.preact.assign(L - 1, Mat());
    cs.cfac.assign(L - 1, Mat());
    cs.istd.assign(L - 1, Mat());
    cs.act.push_back(x);
    int bn_idx = 0;
    for (int l = 0; l < L; ++l) {
        const Layer& layer = net.layers[l];
        Mat h(cs.act.back().rows, layer.W.cols);
        matmul_nn(cs.act.back(), layer.W, h);
        kernels::add_bias_rows(h, layer.b);
        if (l < L - 1) {
            if (layer.has_bn()) {
                const Mat& mean = stats ? stats->mean[bn_idx] : layer.run_mean;
                const Mat& var = stats ? stats->var[bn_idx] : layer.run_var;
                ++bn_idx;
                Mat istd(1, h.cols), cfac(1, h.cols);
                for (int j = 0; j < h.cols; ++j) {
                    istd(0, j) = 1.0 / std::sqrt(var(0, j) + bn_eps);
                    cfac(0, j) = layer.gamma(0, j) * istd(0, j);
                }
                apply_bn_affine(h, layer.gamma, layer.beta, mean, var, bn_eps);
                cs.istd[l] = std::move(istd);
                cs.cfac[l] = std::move(cfac);
            }
            cs.preact[l] = h;
            kernels::leaky_relu_fwd(h, net.spec.leaky_slope, h);
            cs.act.push_back(std::move(h));
        } else {
            cs.out = std::move(h);
        }
    }
}

void critic_input_grad(const Mlp& net, CriticSweep& cs) {
    const int L = net.spec.num_layers();
    const double slope = net.spec.leaky_slope;
    cs.u.assign(L - 1, Mat());
    cs.m.assign(L - 1, Mat());
    cs.vv.assign(L - 1, Mat());
    const int n = cs.act[0].rows;
    if (L == 1) {
        cs.g = Mat(n, net.layers[0].W.rows);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cs.g.cols; ++j) cs.g(i, j) = net.layers[0].W(j, 0);
        return;
    }
    {
        const Mat& WL = net.layers[L - 1].W;  // d_{L-1} x 1
        Mat u(n, WL.rows);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < WL.rows; ++j) u(i, j) = WL(j, 0);
        cs.u[L - 2] = std::move(u);
    }
    for (int h = L - 2; h >= 0; --h) {
        const Mat& o = cs.preact[h];
        Mat m(o.rows, o.cols);
        const bool bn = !cs.cfac[h].empty();
        for (int i = 0; i < o.rows; ++i) {
            const double* oi = o.row(i);
            double* mi = m.row(i);
            for (int j = 0; j < o.cols; ++j) {
                const double d = oi[j] > 0.0 ? 1.0 : slope;
                mi[j] = bn ? d * cs.cfac[h](0, j) : d;
            }
        }
        Mat v(o.rows, o.cols);
        kernels::ewise_mul(cs.u[h], m, v);
        cs.m[h] = std::move(m);
        Mat next(n, net.layers[h].W.rows);
        matmul_nt(v, net.layers[h].W, next);
        cs.vv[h] = std::move(v);
        if (h > 0)
            cs.u[h - 1] = std::move(next);
        else
            cs.g = std::move(next);
    }
}

}  // namespace

Mat Mlp::input_gradient(const Mat& x) const {
    if (spec.output_dim() != 1)
        throw ContractError("input_gradient: network output must be scalar");
    CriticSweep cs;
    critic_forward(*this, x, nullptr, cs);
    critic_input_grad(*this, cs);
    return std::move(cs.g);
}

ad::Node* gradient_penalty(ad::Tape& tape, TiedMlp& critic, const Mat& zhat,
                           const BnSnapshot& stats) {
    Mlp& net = *critic.net;
    if (net.spec.output_dim() != 1)
        throw ContractError("gradient_penalty: critic output must be scalar");
    auto cs = std::make_shared<CriticSweep>();
    critic_forward(net, zhat, &stats, *cs);
    critic_input_grad(net, *cs);

    const int n = zhat.rows;
    auto norms = std::make_shared<std::vector<double>>(n);
    double p = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* gi = cs->g.row(i);
        for (int j = 0; j < cs->g.cols; ++j) s += gi[j] * gi[j];
        const double t = std::sqrt(s);
        (*norms)[i] = t;
        p += (t - 1.0) * (t - 1.0);
    }
    Mat val(1, 1);
    val(0, 0) = p / n;

    std::vector<ad::Node*> parents;
    for (const TiedLayer& t : critic.layers) {
        parents.push_back(t.W);
        parents.push_back(t.b);
        if (t.gamma) {
            parents.push_back(t.gamma);
            parents.push_back(t.beta);
        }
    }

    Mlp* netp = &net;
    auto backfn = [netp, cs, norms, n](ad::Tape&, ad::Node& self) {
        const double gscale = self.grad(0, 0);
        const int L = netp->spec.num_layers();
        const double slope = netp->spec.leaky_slope;
        // r = gscale * (2/n) * (t - 1)/t * g, rows with t = 0 contribute 0
        Mat q(n, cs->g.cols);
        for (int i = 0; i < n; ++i) {
            const double t = (*norms)[i];
            const double c = t > 0.0 ? gscale * 2.0 / n * (t - 1.0) / t : 0.0;
            const double* gi = cs->g.row(i);
            double* qi = q.row(i);
            for (int j = 0; j < q.cols; ++j) qi[j] = c * gi[j];
        }
        for (int h = 0; h < L - 1; ++h) {
            const Mat& W = netp->layers[h].W;
            Mat S(n, W.cols);
            matmul_nn(q, W, S);
            matmul_tn(q, cs->vv[h], netp->grads[h].W, true);
            if (!cs->cfac[h].empty()) {
                // d penalty / d gamma_j = sum_i S_ij u_ij leaky'(o_ij) istd_j
                Mat& ggamma = netp->grads[h].gamma;
                const Mat& o = cs->preact[h];
                for (int j = 0; j < W.cols; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double d = o(i, j) > 0.0 ? 1.0 : slope;
                        s += S(i, j) * cs->u[h](i, j) * d;
                    }
                    ggamma(0, j) += s * cs->istd[h](0, j);
                }
            }
            Mat qn(n, W.cols);
            kernels::ewise_mul(S, cs->m[h], qn);
            q = std::move(qn);
        }
        Mat& gW = netp->grads[L - 1].W;
        for (int j = 0; j < q.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += q(i, j);
            gW(j, 0) += s;
        }
    };
    return tape.custom(std::move(val), parents, backfn);
}

double gradient_penalty_value(const Mlp& critic, const Mat& zhat, const BnSnapshot& stats) {
    if (critic.spec.output_dim() != 1)
        throw ContractError("gradient_penalty: critic output must be scalar");
    CriticSweep cs;
    critic_forward(critic, zhat, &stats, cs);
    critic_input_grad(critic, cs);
    double p = 0.0;
    for (int i = 0; i < cs.g.rows; ++i) {
        double s = 0.0;
        const double* gi = cs.g.row(i);
        for (int j = 0; j < cs.g.cols; ++j) s += gi[j] * gi[j];
        const double t = std::sqrt(s);
        p += (t - 1.0) * (t - 1.0);
    }
    return p / cs.g.rows;
}

Adam::Adam(AdamConfig cfg, std::vector<std::pair<Mat*, Mat*>> param_grads)
    : cfg_(cfg), pg_(std::move(param_grads)) {
    m_.reserve(pg_.size());
    v_.reserve(pg_.size());
    for (const auto& [p, g] : pg_) {
        if (p->rows != g->rows || p->cols != g->cols)
            throw ShapeError("Adam: parameter/gradient shape mismatch");
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < pg_.size(); ++k) {
        Mat& p = *pg_[k].first;
        const Mat& g = *pg_[k].second;
        Mat& m = m_[k];
        Mat& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.a[i] = cfg_.beta1 * m.a[i] + (1.0 - cfg_.beta1) * g.a[i];
            v.a[i] = cfg_.beta2 * v.a[i] + (1.0 - cfg_.beta2) * g.a[i] * g.a[i];
            const double mhat = m.a[i] / bc1;
            const double vhat = v.a[i] / bc2;
            p.a[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace cegm::nn
