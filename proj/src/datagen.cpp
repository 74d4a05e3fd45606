#include "causalegm/datagen.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <limits>

#include "causalegm/ad.hpp"
#include "causalegm/errors.hpp"
#include "causalegm/kernels.hpp"
#include "causalegm/mlp.hpp"
#include "causalegm/rng.hpp"

namespace cegm {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-kind outcome draws given a covariate row and a treatment level. The
// generators and draw_potential_outcomes share these so the sampled law and
// the oracle checks cannot drift apart.
double hirano_outcome(const double* v, double x, Rng& rng) {
    const double s = v[0] + v[2];
    return x + s * std::exp(-x * s) + rng.normal();
}

double sun_outcome(const double* v, double x, Rng& rng) {
    return x + sun_link(3, v[0]) + sun_link(4, v[1]) + sun_link(5, v[4]) + sun_link(6, v[5]) +
           rng.normal();
}

double colangelo_outcome(const double* v, double vtheta, double x, Rng& rng) {
    return 1.2 * x + 1.2 * vtheta + x * x * x + x * v[0] + rng.normal();
}

double twins_risk(double x) { return -2.0 / (1.0 + std::exp(-3.0 * x)); }

// Lower-bidiagonal Cholesky factor of the tridiagonal Toeplitz covariance with
// unit diagonal and 0.5 on the first off-diagonals: v_0 = d_0 w_0 and
// v_i = a_i w_{i-1} + d_i w_i reproduce it exactly.
void colangelo_chol(int p, std::vector<double>& a, std::vector<double>& d) {
    a.assign(p, 0.0);
    d.assign(p, 0.0);
    d[0] = 1.0;
    for (int i = 1; i < p; ++i) {
        a[i] = 0.5 / d[i - 1];
        d[i] = std::sqrt(1.0 - a[i] * a[i]);
    }
}

void draw_colangelo_row(Rng& rng, const std::vector<double>& a, const std::vector<double>& d,
                        std::vector<double>& w, double* v) {
    const int p = static_cast<int>(a.size());
    for (int j = 0; j < p; ++j) w[j] = rng.normal();
    v[0] = d[0] * w[0];
    for (int j = 1; j < p; ++j) v[j] = a[j] * w[j - 1] + d[j] * w[j];
}

double dot_theta(const double* v, int p) {
    double s = 0.0;
    for (int j = 0; j < p; ++j) s += v[j] * colangelo_theta(j + 1);
    return s;
}

void require_min_p(int p, int lo, const char* kind) {
    if (p < lo)
        throw ConfigError(std::string(kind) + " needs p >= " + std::to_string(lo) + ", got " +
                          std::to_string(p));
}

void require_n(int n) {
    if (n < 1) throw ConfigError("n must be >= 1, got " + std::to_string(n));
}

SyntheticDataset blank(DataKind kind, int n, int p, std::uint64_t seed) {
    SyntheticDataset ds;
    ds.kind = kind;
    ds.seed = seed;
    ds.oracle.kind = kind;
    ds.v = Mat(n, p);
    ds.x = Mat(n, 1);
    ds.y = Mat(n, 1);
    return ds;
}

// Core of the twins simulation once covariates exist; continues on the caller's
// stream so the synthetic overload stays a single seeded sequence.
SyntheticDataset twins_from(const Mat& covariates, std::uint64_t seed, Rng& rng) {
    const int n = covariates.rows, p = covariates.cols;
    for (double value : covariates.a)
        if (!std::isfinite(value)) throw ParseError("twins covariates contain non-finite values");
    SyntheticDataset ds = blank(DataKind::twins, n, p, seed);
    ds.v = covariates;
    std::vector<double> gamma(p);
    for (int j = 0; j < p; ++j) gamma[j] = 0.025 * rng.normal();
    double offset = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* vi = ds.v.row(i);
        double vg = 0.0;
        for (int j = 0; j < p; ++j) vg += vi[j] * gamma[j];
        offset += vg / n;
        const double x = rng.uniform(0.0, 2.0);  // stand-in for weight below 2 kg
        ds.x(i, 0) = x;
        ds.y(i, 0) = twins_risk(x) + vg + 0.25 * rng.normal();
    }
    ds.oracle.offset = offset;
    return ds;
}

}  // namespace

double sun_link(int k, double u) {
    switch (k) {
        case 1: return -2.0 * std::sin(2.0 * u);
        case 2: return u * u - 1.0 / 3.0;
        case 3: return u - 0.5;
        case 4: return std::cos(u);
        case 5: return u * u;
        case 6: return u;
    }
    throw ConfigError("sun link index must be in 1..6, got " + std::to_string(k));
}

double colangelo_theta(int j) {
    if (j < 1) throw ConfigError("theta index must be >= 1, got " + std::to_string(j));
    return 1.0 / (static_cast<double>(j) * j);
}

std::string to_string(DataKind kind) {
    switch (kind) {
        case DataKind::hirano: return "hirano";
        case DataKind::sun: return "sun";
        case DataKind::colangelo: return "colangelo";
        case DataKind::twins: return "twins";
        case DataKind::constant_binary: return "constant_binary";
    }
    throw ConfigError("unknown data kind");
}

DataKind data_kind_from_string(const std::string& name) {
    for (DataKind kind : {DataKind::hirano, DataKind::sun, DataKind::colangelo, DataKind::twins,
                          DataKind::constant_binary})
        if (to_string(kind) == name) return kind;
    throw ConfigError("unknown dataset kind '" + name + "'");
}

double AdrfOracle::operator()(double x) const {
    switch (kind) {
        case DataKind::hirano: {
            const double d = 1.0 + x;
            return x + 2.0 / (d * d * d);
        }
        case DataKind::sun: return x + 0.5 + std::exp(-0.5);
        case DataKind::colangelo: return 1.2 * x + x * x * x;
        case DataKind::twins: return twins_risk(x) + offset;
        case DataKind::constant_binary: return tau * x;
    }
    throw ConfigError("unknown data kind");
}

SyntheticDataset gen_hirano(int n, int p, std::uint64_t seed) {
    require_n(n);
    require_min_p(p, 3, "hirano");
    SyntheticDataset ds = blank(DataKind::hirano, n, p, seed);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double* vi = ds.v.row(i);
        for (int j = 0; j < p; ++j) vi[j] = rng.exponential(1.0);
        const double x = rng.exponential(vi[0] + vi[1]);
        ds.x(i, 0) = x;
        ds.y(i, 0) = hirano_outcome(vi, x, rng);
    }
    return ds;
}

SyntheticDataset gen_sun(int n, int p, std::uint64_t seed) {
    require_n(n);
    require_min_p(p, 6, "sun");
    SyntheticDataset ds = blank(DataKind::sun, n, p, seed);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double* vi = ds.v.row(i);
        for (int j = 0; j < p; ++j) vi[j] = rng.normal();
        const double x = sun_link(1, vi[0]) + sun_link(2, vi[1]) + sun_link(3, vi[2]) +
                         sun_link(4, vi[3]) + rng.normal();
        ds.x(i, 0) = x;
        ds.y(i, 0) = sun_outcome(vi, x, rng);
    }
    return ds;
}

SyntheticDataset gen_colangelo(int n, int p, std::uint64_t seed) {
    require_n(n);
    require_min_p(p, 1, "colangelo");
    SyntheticDataset ds = blank(DataKind::colangelo, n, p, seed);
    std::vector<double> a, d, w(p);
    colangelo_chol(p, a, d);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double* vi = ds.v.row(i);
        draw_colangelo_row(rng, a, d, w, vi);
        const double vtheta = dot_theta(vi, p);
        const double x = normal_cdf(3.0 * vtheta) + 0.75 * rng.normal() - 0.5;
        ds.x(i, 0) = x;
        ds.y(i, 0) = colangelo_outcome(vi, vtheta, x, rng);
    }
    return ds;
}

SyntheticDataset gen_twins_style(const Mat& covariates, std::uint64_t seed) {
    require_n(covariates.rows);
    require_min_p(covariates.cols, 1, "twins");
    Rng rng(seed);
    return twins_from(covariates, seed, rng);
}

SyntheticDataset gen_twins_style(int n, int p, std::uint64_t seed) {
    require_n(n);
    require_min_p(p, 1, "twins");
    Rng rng(seed);
    Mat covariates(n, p);
    for (double& value : covariates.a) value = rng.normal();
    return twins_from(covariates, seed, rng);
}

SyntheticDataset gen_constant_effect_binary(int n, int p, double tau, std::uint64_t seed) {
    require_n(n);
    require_min_p(p, 1, "constant_binary");
    SyntheticDataset ds = blank(DataKind::constant_binary, n, p, seed);
    ds.oracle.tau = tau;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double* vi = ds.v.row(i);
        for (int j = 0; j < p; ++j) vi[j] = rng.normal();
        const double x = rng.bernoulli(sigmoid(vi[0])) ? 1.0 : 0.0;
        ds.x(i, 0) = x;
        ds.y(i, 0) = tau * x + vi[0] + 0.5 * rng.normal();
    }
    return ds;
}

SyntheticDataset generate(DataKind kind, int n, int p, double tau, std::uint64_t seed) {
    switch (kind) {
        case DataKind::hirano: return gen_hirano(n, p, seed);
        case DataKind::sun: return gen_sun(n, p, seed);
        case DataKind::colangelo: return gen_colangelo(n, p, seed);
        case DataKind::twins: return gen_twins_style(n, p, seed);
        case DataKind::constant_binary: return gen_constant_effect_binary(n, p, tau, seed);
    }
    throw ConfigError("unknown data kind");
}

std::vector<double> draw_potential_outcomes(DataKind kind, double x, int n, int p,
                                            std::uint64_t seed, double tau) {
    require_n(n);
    std::vector<double> out(n);
    Rng rng(seed);
    std::vector<double> v(p);
    switch (kind) {
        case DataKind::hirano:
            require_min_p(p, 3, "hirano");
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < p; ++j) v[j] = rng.exponential(1.0);
                out[i] = hirano_outcome(v.data(), x, rng);
            }
            break;
        case DataKind::sun:
            require_min_p(p, 6, "sun");
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < p; ++j) v[j] = rng.normal();
                out[i] = sun_outcome(v.data(), x, rng);
            }
            break;
        case DataKind::colangelo: {
            require_min_p(p, 1, "colangelo");
            std::vector<double> a, d, w(p);
            colangelo_chol(p, a, d);
            for (int i = 0; i < n; ++i) {
                draw_colangelo_row(rng, a, d, w, v.data());
                out[i] = colangelo_outcome(v.data(), dot_theta(v.data(), p), x, rng);
            }
            break;
        }
        case DataKind::twins: {
            require_min_p(p, 1, "twins");
            std::vector<double> gamma(p);
            for (int j = 0; j < p; ++j) gamma[j] = 0.025 * rng.normal();
            for (int i = 0; i < n; ++i) {
                double vg = 0.0;
                for (int j = 0; j < p; ++j) vg += rng.normal() * gamma[j];
                out[i] = twins_risk(x) + vg + 0.25 * rng.normal();
            }
            break;
        }
        case DataKind::constant_binary:
            require_min_p(p, 1, "constant_binary");
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < p; ++j) v[j] = rng.normal();
                out[i] = tau * x + v[0] + 0.5 * rng.normal();
            }
            break;
    }
    return out;
}

AppendixBDesign make_appendix_b_design(std::uint64_t seed) {
    AppendixBDesign design;
    design.lambda.resize(design.p);
    for (int i = 1; i <= design.p; ++i)
        design.lambda[i - 1] =
            i <= 10 ? 5.0 - (i - 1) / 9.0 : 0.1 - (i - 11) / 400.0;

    Rng rng(seed);
    Eigen::MatrixXd gauss(design.p, design.p);
    for (int i = 0; i < design.p; ++i)
        for (int j = 0; j < design.p; ++j) gauss(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Householder leaves the column signs arbitrary; pinning R's diagonal
    // positive makes the basis a pure function of the seed
    for (int j = 0; j < design.p; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;

    design.u = Mat(design.p, design.p);
    for (int i = 0; i < design.p; ++i)
        for (int j = 0; j < design.p; ++j) design.u(i, j) = q(i, j);
    design.mu = Mat(1, design.p);
    for (int j = 0; j < design.p; ++j) design.mu(0, j) = rng.uniform(-1.0, 1.0);
    return design;
}

Mat gen_appendix_b(const AppendixBDesign& design, int n, std::uint64_t seed) {
    require_n(n);
    const int p = design.p;
    Mat w(n, p);
    Rng rng(seed);
    for (double& value : w.a) value = rng.normal();
    // V = mu + W (U sqrt(Lambda))', with the scaling folded into the basis
    Mat scaled = design.u;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) scaled(i, j) *= std::sqrt(design.lambda[j]);
    Mat v(n, p);
    kernels::matmul_nt(w, scaled, v);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) v(i, j) += design.mu(0, j);
    return v;
}

Mat whiten(const AppendixBDesign& design, const Mat& v) {
    require_shape(v, v.rows, design.p, "whiten input");
    Mat centered = v;
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < design.p; ++j) centered(i, j) -= design.mu(0, j);
    Mat t(v.rows, design.p);
    kernels::matmul_nn(centered, design.u, t);
    for (int i = 0; i < t.rows; ++i)
        for (int j = 0; j < design.p; ++j) t(i, j) /= std::sqrt(design.lambda[j]);
    return t;
}

Mat unwhiten(const AppendixBDesign& design, const Mat& t) {
    require_shape(t, t.rows, design.p, "unwhiten input");
    Mat scaled = t;
    for (int i = 0; i < t.rows; ++i)
        for (int j = 0; j < design.p; ++j) scaled(i, j) *= std::sqrt(design.lambda[j]);
    Mat v(t.rows, design.p);
    kernels::matmul_nt(scaled, design.u, v);
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < design.p; ++j) v(i, j) += design.mu(0, j);
    return v;
}

Mat fixed_features(const AppendixBDesign& design, const Mat& v) {
    const Mat t = whiten(design, v);
    Mat features(v.rows, 3);
    const double s2 = std::sqrt(2.0), s10 = std::sqrt(10.0);
    for (int i = 0; i < v.rows; ++i) {
        const double* ti = t.row(i);
        features(i, 0) = (ti[7] + ti[10]) / s2;
        double sum1 = ti[8];
        for (int j = 11; j < 20; ++j) sum1 += ti[j];
        features(i, 1) = sum1 / s10;
        double sum2 = ti[9];
        for (int j = 21; j < 30; ++j) sum2 += ti[j];
        features(i, 2) = sum2 / s10;
    }
    return features;
}

double theoretical_rec_error(const AppendixBDesign& design, int q) {
    if (q < 1 || q >= design.p)
        throw ConfigError("q must be in [1, " + std::to_string(design.p - 1) + "], got " +
                          std::to_string(q));
    double sum = 0.0;
    for (int i = q; i < design.p; ++i) sum += design.lambda[i];
    return sum;
}

AppendixBResult run_appendix_b_experiment(const AppendixBOptions& opt) {
    if (opt.n_train < 2 || opt.n_holdout < 1)
        throw ConfigError("appendix-b needs n_train >= 2 and n_holdout >= 1");
    if (opt.iterations < 1 || opt.eval_every < 1 || opt.batch_size < 2 || opt.lr <= 0.0)
        throw ConfigError("appendix-b training options out of range");

    const AppendixBDesign design = make_appendix_b_design(split_seed(opt.seed, 0));
    const Mat train = gen_appendix_b(design, opt.n_train, split_seed(opt.seed, 1));
    const Mat holdout = gen_appendix_b(design, opt.n_holdout, split_seed(opt.seed, 2));
    const Mat train_features = fixed_features(design, train);
    const Mat holdout_features = fixed_features(design, holdout);

    // three frozen features plus a trainable ten-output head form the encoder
    nn::MlpSpec e_spec;
    e_spec.layer_sizes = {design.p, 64, 64, 64, 64, 10};
    nn::MlpSpec g_spec;
    g_spec.layer_sizes = {design.q, 64, 64, 64, 64, design.p};
    nn::Mlp e3 = nn::Mlp::init(e_spec, split_seed(opt.seed, 3));
    nn::Mlp g = nn::Mlp::init(g_spec, split_seed(opt.seed, 4));
    nn::AdamConfig adam_cfg;
    adam_cfg.lr = opt.lr;
    auto pairs = e3.param_grad_pairs();
    const auto g_pairs = g.param_grad_pairs();
    pairs.insert(pairs.end(), g_pairs.begin(), g_pairs.end());
    nn::Adam adam(adam_cfg, pairs);
    Rng rng(split_seed(opt.seed, 5));

    auto holdout_error = [&] {
        const Mat head = e3.forward(holdout);
        Mat code(holdout.rows, design.q);
        for (int i = 0; i < holdout.rows; ++i) {
            for (int j = 0; j < 3; ++j) code(i, j) = holdout_features(i, j);
            for (int j = 0; j < 10; ++j) code(i, 3 + j) = head(i, j);
        }
        const Mat rec = g.forward(code);
        double err = 0.0;
        for (int i = 0; i < holdout.rows; ++i)
            for (int j = 0; j < design.p; ++j) {
                const double d = holdout(i, j) - rec(i, j);
                err += d * d / holdout.rows;
            }
        return err;
    };

    AppendixBResult result;
    result.theoretical = theoretical_rec_error(design, design.q);
    result.best_holdout = std::numeric_limits<double>::infinity();

    Mat vb(opt.batch_size, design.p), fb(opt.batch_size, 3);
    for (int iter = 1; iter <= opt.iterations; ++iter) {
        for (int i = 0; i < opt.batch_size; ++i) {
            const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(train.rows)));
            for (int j = 0; j < design.p; ++j) vb(i, j) = train(r, j);
            for (int j = 0; j < 3; ++j) fb(i, j) = train_features(r, j);
        }
        ad::Tape tape;
        auto e3_t = nn::tie(tape, e3, true);
        auto g_t = nn::tie(tape, g, true);
        auto* vb_node = tape.constant_ref(vb);
        auto* head = nn::build_forward(tape, e3_t, vb_node, nn::Mode::train, false, 0.99);
        auto* code = tape.concat_cols({tape.constant_ref(fb), head});
        auto* rec = nn::build_forward(tape, g_t, code, nn::Mode::train, false, 0.99);
        auto* loss = tape.mean_row_sumsq(tape.sub(vb_node, rec));
        if (!std::isfinite(loss->v()(0, 0)))
            throw TrainError("non-finite reconstruction loss at iteration " +
                             std::to_string(iter));
        e3.zero_grads();
        g.zero_grads();
        tape.backward(loss);
        adam.step();

        if (iter % opt.eval_every == 0 || iter == opt.iterations) {
            const double err = holdout_error();
            result.checkpoints.emplace_back(iter, err);
            if (err < result.best_holdout) {
                result.best_holdout = err;
                result.best_iteration = iter;
            }
            if (opt.progress) opt.progress(iter, err);
        }
    }
    result.delta = result.best_holdout - result.theoretical;
    return result;
}

}  // namespace cegm
