// Acceptance gate for the whole pipeline. Each criterion prints exactly one
// PASS/FAIL line with the measured quantities and its threshold; the process
// exit code is the number of failed criteria. Criteria run cheapest first so
// a broken build fails fast; the multi-seed training criteria at the end
// dominate the runtime (roughly an hour on one core).
//
// Usage: acceptance [--only N]   restricts the run to criterion N (criteria 4
// and 8 share their trainings and always run together).

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "causalegm/baselines.hpp"
#include "causalegm/datagen.hpp"
#include "causalegm/estimators.hpp"
#include "causalegm/kernels.hpp"
#include "causalegm/metrics.hpp"
#include "causalegm/model.hpp"
#include "testutil.hpp"

using namespace cegm;
using nn::Mlp;
using nn::Mode;
using testutil::random_mat;

namespace {

int g_failed = 0;
int g_run = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    ++g_run;
    if (!pass) ++g_failed;
}

void note(const std::string& line) {
    std::fprintf(stderr, "[acceptance] %s\n", line.c_str());
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------
// criterion 1: training-objective gradients against central finite differences
// on networks small enough (<= 50 parameters each) for FD to stay exact

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.p = 3;
    cfg.partition = {1, 1, 1, 1};
    cfg.gen_hidden = {3};
    cfg.critic_hidden = {2};
    cfg.batch_size = 4;
    cfg.seed = 7;
    return cfg;
}

double critic_fd_worst(bool bn) {
    ModelConfig cfg = tiny_config();
    cfg.bn_critics = bn;
    CausalEGMModel m = CausalEGMModel::build(cfg);
    Rng rng(17);
    Mat vb = random_mat(4, 3, rng);
    Mat prior = random_mat(4, 4, rng);
    const Mat z_fake = m.e_net.forward(vb);
    const Mat v_fake = m.g_net.forward(prior);
    const Mat zhat = random_mat(4, 4, rng);
    const Mat vhat = random_mat(4, 3, rng);
    const nn::BnSnapshot dz_stats = m.dz_net.snapshot_running_stats();
    const nn::BnSnapshot dv_stats = m.dv_net.snapshot_running_stats();
    const double lambda = cfg.gp_lambda;

    // value route: plain forwards, no tape; the penalty term makes this a
    // second-derivative check on the critics
    auto objective = [&] {
        using kernels::mean_all;
        const double dz = -mean_all(m.dz_net.forward_pre_output(prior, Mode::train)) +
                          mean_all(m.dz_net.forward_pre_output(z_fake, Mode::train)) +
                          lambda * nn::gradient_penalty_value(m.dz_net, zhat, dz_stats);
        const double dv = -mean_all(m.dv_net.forward_pre_output(vb, Mode::train)) +
                          mean_all(m.dv_net.forward_pre_output(v_fake, Mode::train)) +
                          lambda * nn::gradient_penalty_value(m.dv_net, vhat, dv_stats);
        return dz + dv;
    };
    auto compute_grads = [&] {
        ad::Tape t;
        auto dz = nn::tie(t, m.dz_net, true);
        auto dv = nn::tie(t, m.dv_net, true);
        auto* ldz = t.add_scalars(
            {t.scale(t.mean_all(nn::build_forward(t, dz, t.constant_ref(prior), Mode::train,
                                                  false, cfg.bn_momentum, false)),
                     -1.0),
             t.mean_all(nn::build_forward(t, dz, t.constant_ref(z_fake), Mode::train, false,
                                          cfg.bn_momentum, false)),
             t.scale(nn::gradient_penalty(t, dz, zhat, dz_stats), lambda)});
        auto* ldv = t.add_scalars(
            {t.scale(t.mean_all(nn::build_forward(t, dv, t.constant_ref(vb), Mode::train,
                                                  false, cfg.bn_momentum, false)),
                     -1.0),
             t.mean_all(nn::build_forward(t, dv, t.constant_ref(v_fake), Mode::train, false,
                                          cfg.bn_momentum, false)),
             t.scale(nn::gradient_penalty(t, dv, vhat, dv_stats), lambda)});
        t.backward(t.add_scalars({ldz, ldv}));
    };
    return testutil::fd_check_params({&m.dz_net, &m.dv_net}, objective, compute_grads);
}

double generator_fd_worst() {
    ModelConfig cfg = tiny_config();
    CausalEGMModel m = CausalEGMModel::build(cfg);
    Rng rng(19);
    Mat vb = random_mat(4, 3, rng);
    Mat xb = random_mat(4, 1, rng);
    Mat yb = random_mat(4, 1, rng);
    Mat prior = random_mat(4, 4, rng);

    // value route rebuilt from scalar loops so the tape is checked against
    // arithmetic it shares nothing with
    auto naive_loss = [&] {
        using kernels::mean_all;
        using testutil::naive_forward;
        const Mat z_enc = naive_forward(m.e_net, vb);
        double loss = -mean_all(m.dz_net.forward_pre_output(z_enc, Mode::train));
        const Mat v_fake = naive_forward(m.g_net, prior);
        loss += -mean_all(m.dv_net.forward_pre_output(v_fake, Mode::train));
        const Mat v_rec = naive_forward(m.g_net, z_enc);
        const Mat z_rec = naive_forward(m.e_net, v_fake);
        double rec = 0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 3; ++j)
                rec += (vb(i, j) - v_rec(i, j)) * (vb(i, j) - v_rec(i, j)) / 4.0;
            for (int j = 0; j < 4; ++j)
                rec += (prior(i, j) - z_rec(i, j)) * (prior(i, j) - z_rec(i, j)) / 4.0;
        }
        loss += rec;
        double mse = 0;
        for (int i = 0; i < 4; ++i) {
            Mat fi(1, 3);
            fi(0, 0) = xb(i, 0);
            fi(0, 1) = z_enc(i, 0);
            fi(0, 2) = z_enc(i, 1);
            const double yhat = naive_forward(m.f_net, fi)(0, 0);
            mse += (yb(i, 0) - yhat) * (yb(i, 0) - yhat) / 4.0;
            Mat hi(1, 2);
            hi(0, 0) = z_enc(i, 0);
            hi(0, 1) = z_enc(i, 2);
            const double xhat = naive_forward(m.h_net, hi)(0, 0);
            mse += (xb(i, 0) - xhat) * (xb(i, 0) - xhat) / 4.0;
        }
        return loss + mse;
    };
    auto compute_grads = [&] {
        ad::Tape t;
        auto e = nn::tie(t, m.e_net, true);
        auto g = nn::tie(t, m.g_net, true);
        auto f = nn::tie(t, m.f_net, true);
        auto h = nn::tie(t, m.h_net, true);
        auto dz = nn::tie(t, m.dz_net, false);
        auto dv = nn::tie(t, m.dv_net, false);
        auto* vb_node = t.constant_ref(vb);
        auto* prior_node = t.constant_ref(prior);
        auto* z_enc = nn::build_forward(t, e, vb_node, Mode::train, false, cfg.bn_momentum);
        auto* v_fake = nn::build_forward(t, g, prior_node, Mode::train, false, cfg.bn_momentum);
        std::vector<ad::Node*> terms;
        terms.push_back(t.scale(
            t.mean_all(nn::build_forward(t, dz, z_enc, Mode::train, false, cfg.bn_momentum, false)),
            -1.0));
        terms.push_back(t.scale(
            t.mean_all(nn::build_forward(t, dv, v_fake, Mode::train, false, cfg.bn_momentum, false)),
            -1.0));
        terms.push_back(t.mean_row_sumsq(
            t.sub(vb_node, nn::build_forward(t, g, z_enc, Mode::train, false, cfg.bn_momentum))));
        terms.push_back(t.mean_row_sumsq(t.sub(
            prior_node, nn::build_forward(t, e, v_fake, Mode::train, false, cfg.bn_momentum))));
        auto* z0 = t.slice_cols(z_enc, 0, 1);
        auto* z1 = t.slice_cols(z_enc, 1, 2);
        auto* z2 = t.slice_cols(z_enc, 2, 3);
        auto* xb_node = t.constant_ref(xb);
        terms.push_back(t.mean_row_sumsq(
            t.sub(t.constant_ref(yb),
                  nn::build_forward(t, f, t.concat_cols({xb_node, z0, z1}), Mode::train, false,
                                    cfg.bn_momentum))));
        terms.push_back(t.mean_row_sumsq(
            t.sub(xb_node, nn::build_forward(t, h, t.concat_cols({z0, z2}), Mode::train, false,
                                             cfg.bn_momentum))));
        t.backward(t.add_scalars(terms));
    };
    return testutil::fd_check_params({&m.e_net, &m.g_net, &m.f_net, &m.h_net}, naive_loss,
                                     compute_grads);
}

void check_gradients() {
    std::size_t max_params = 0;
    {
        CausalEGMModel m = CausalEGMModel::build(tiny_config());
        for (const Mlp* net : {&m.e_net, &m.g_net, &m.f_net, &m.h_net, &m.dz_net, &m.dv_net})
            max_params = std::max(max_params, net->param_count());
    }
    double worst = 0.0;
    for (bool bn : {true, false}) worst = std::max(worst, critic_fd_worst(bn));
    worst = std::max(worst, generator_fd_worst());
    report(1, worst < 1e-5 && max_params <= 50,
           "all loss-term gradients match finite differences: worst relative error " +
               fmt(worst, 3) + " (need < 1e-5), largest network " + std::to_string(max_params) +
               " parameters (need <= 50)");
}

// ---------------------------------------------------------------------------
// criterion 2: dose-response oracles, closed forms and interventional draws

void check_oracles() {
    double closed_worst = 0.0;
    auto closed = [&](double got, double want) {
        closed_worst = std::max(closed_worst, std::abs(got - want));
    };
    closed(AdrfOracle{DataKind::hirano, 0.0, 0.0}(0.0), 2.0);
    closed(AdrfOracle{DataKind::hirano, 0.0, 0.0}(1.0), 1.25);
    closed(AdrfOracle{DataKind::sun, 0.0, 0.0}(0.0), 0.5 + std::exp(-0.5));
    closed(AdrfOracle{DataKind::colangelo, 0.0, 0.0}(1.0), 2.2);

    // setting the treatment by intervention and averaging fresh draws is the
    // definitional check of each curve; the conditional mean E[Y | X near x]
    // would be confounded and converge somewhere else
    struct Probe {
        DataKind kind;
        int p;
        std::vector<double> xs;
        double tau;
    };
    const std::vector<Probe> probes = {
        {DataKind::hirano, 3, {0.3, 0.8, 1.5, 2.5, 4.0}, 1.0},
        {DataKind::sun, 6, {-1.5, -0.5, 0.2, 0.9, 1.8}, 1.0},
        {DataKind::colangelo, 5, {-0.9, -0.4, 0.1, 0.5, 0.9}, 1.0},
        {DataKind::twins, 8, {0.2, 0.6, 1.0, 1.4, 1.8}, 1.0},
        {DataKind::constant_binary, 4, {0.0, 1.0}, 2.0},
    };
    const int n = 200000;
    double worst_z = 0.0;
    int points = 0;
    std::uint64_t seed = 900001;
    for (const auto& probe : probes) {
        const AdrfOracle oracle{probe.kind, 0.0, probe.tau};
        for (double x : probe.xs) {
            const auto draws = draw_potential_outcomes(probe.kind, x, n, probe.p, seed++,
                                                       probe.tau);
            const double se = sd_of(draws) / std::sqrt(static_cast<double>(n));
            worst_z = std::max(worst_z, std::abs(mean_of(draws) - oracle(x)) / se);
            ++points;
        }
    }
    report(2, closed_worst < 1e-12 && worst_z < 3.0,
           "closed-form curve values off by at most " + fmt(closed_worst, 3) +
               " (need < 1e-12); interventional means at " + std::to_string(points) +
               " points within " + fmt(worst_z, 3) + " standard errors (need < 3)");
}

// ---------------------------------------------------------------------------
// criterion 10: metric definitions on hand-checkable instances

void check_metric_units() {
    bool ok = true;
    std::string first_bad;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond && first_bad.empty()) first_bad = what;
        ok = ok && cond;
    };

    expect(rmse({1, 2, 3}, {1, 2, 3}) == 0.0, "rmse of identical vectors");
    expect(close(rmse({1, 2, 3}, {2, 3, 4}), 1.0, 1e-12), "rmse under constant offset");
    expect(close(rmse({1, 2, 3}, {2, 2, 5}), std::sqrt(5.0 / 3.0), 1e-12), "rmse hand value");

    expect(mape({1, 2}, {1, 2}) == 0.0, "mape of identical vectors");
    expect(close(mape({2, 4}, {2.2, 4.4}), 0.1, 1e-12), "mape of a 10% inflation");
    expect(close(mape({2, 4}, {1, 5}), 0.375, 1e-12), "mape hand value");

    const auto line = [](double a) { return [a](double x) { return a * x; }; };
    expect(close(mtef_bias(line(1.0), line(2.0), {0.25, 0.5, 1.0}), 1.0, 1e-9),
           "slope gap of two lines");
    expect(mtef_bias(line(1.5), line(1.5), {0.3, 0.7}) == 0.0, "slope gap of a curve with itself");
    const AdrfOracle hirano{DataKind::hirano, 0.0, 0.0};
    const auto flat = [](double) { return 0.0; };
    // against a flat estimate the bias at x = 1 is the true slope 1 - 6/(1+x)^4
    expect(close(mtef_bias([&](double x) { return hirano(x); }, flat, {1.0}), 0.625, 1e-3),
           "slope at x=1 of the exponential-confounding curve");

    expect(eps_ate({2, 3}, {1, 1}, {2, 3}, {1, 1}) == 0.0, "eps_ate of exact estimates");
    expect(close(eps_ate({2, 3}, {1, 1}, {2.4, 3.4}, {1, 1}), 0.4, 1e-12),
           "eps_ate under a uniform shift");
    expect(eps_pehe({2, 3}, {1, 1}, {2, 3}, {1, 1}) == 0.0, "eps_pehe of exact estimates");
    expect(close(eps_pehe({2, 3}, {1, 1}, {2.3, 3.3}, {1, 1}), 0.09, 1e-12),
           "eps_pehe with every effect off by 0.3");

    // both effect metrics against plain-loop recomputation on random instances
    Rng rng(2024);
    double metric_worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 3 + static_cast<int>(rng.next_u64() % 40);
        std::vector<double> y1t(n), y0t(n), y1h(n), y0h(n);
        for (int i = 0; i < n; ++i) {
            y1t[i] = rng.normal();
            y0t[i] = rng.normal();
            y1h[i] = rng.normal();
            y0h[i] = rng.normal();
        }
        double sum_sq = 0.0, sum_hat = 0.0, sum_true = 0.0;
        for (int i = 0; i < n; ++i) {
            const double err = (y1h[i] - y0h[i]) - (y1t[i] - y0t[i]);
            sum_sq += err * err;
            sum_hat += y1h[i] - y0h[i];
            sum_true += y1t[i] - y0t[i];
        }
        const double pehe = eps_pehe(y1t, y0t, y1h, y0h);
        const double ate = eps_ate(y1t, y0t, y1h, y0h);
        metric_worst = std::max(metric_worst, std::abs(pehe - sum_sq / n));
        metric_worst = std::max(metric_worst,
                                std::abs(eps_pehe(y1t, y0t, y1h, y0h, true) -
                                         std::sqrt(sum_sq / n)));
        metric_worst = std::max(metric_worst, std::abs(ate - std::abs(sum_hat - sum_true) / n));
    }
    expect(metric_worst < 1e-12, "effect metrics vs plain-loop recomputation");

    report(10, ok,
           ok ? "metric unit values exact; effect metrics match plain loops on 100 random "
                "instances (worst gap " +
                    fmt(metric_worst, 3) + ")"
              : "metric unit check failed first at: " + first_bad);
}

// ---------------------------------------------------------------------------
// criterion 3: regression baselines at full scale recover the reference table

void check_baselines() {
    std::vector<double> ols_r, reg_r;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ds = gen_hirano(20000, 200, seed);
        const std::vector<double>& xs = ds.x.a;
        std::vector<double> mu_true(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) mu_true[i] = ds.oracle(xs[i]);
        ols_r.push_back(rmse(mu_true, ols_adrf(ds, xs).mu_hat));
        reg_r.push_back(rmse(mu_true, reg_adrf(ds, xs).mu_hat));
    }
    const double ols_mean = mean_of(ols_r);
    const double reg_mean = mean_of(reg_r);
    report(3, close(ols_mean, 0.680, 0.10) && close(reg_mean, 0.525, 0.10),
           "linear-fit curve error " + fmt(ols_mean) + " vs reported 0.680, quadratic " +
               fmt(reg_mean) + " vs reported 0.525 (n=20000, p=200, 5 seeds, need within 0.10)");
}

// ---------------------------------------------------------------------------
// criterion 9: bitwise training determinism and lossless persistence

void check_determinism() {
    const auto ds = gen_hirano(1000, 10, 5);
    ModelConfig cfg;
    cfg.p = 10;
    cfg.iterations = 300;
    cfg.seed = 11;
    const CausalEGMModel a = train_model(cfg, ds);
    const CausalEGMModel b = train_model(cfg, ds);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("cegm_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string path_a = (dir / "a.bin").string();
    const std::string path_b = (dir / "b.bin").string();
    save_model(a, path_a);
    save_model(b, path_b);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const std::string bytes_a = slurp(path_a);
    const std::string bytes_b = slurp(path_b);
    const bool bytes_equal = !bytes_a.empty() && bytes_a == bytes_b;

    const CausalEGMModel loaded = load_model(path_a);
    const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
    const auto mem = estimate_adrf(a, ds, grid);
    const auto disk = estimate_adrf(loaded, ds, grid);
    const bool estimates_equal = mem.mu_hat == disk.mu_hat;
    fs::remove_all(dir);

    report(9, bytes_equal && estimates_equal,
           std::string("repeated training wrote ") +
               (bytes_equal ? "byte-identical" : "DIFFERING") + " model files (" +
               std::to_string(bytes_a.size()) + " bytes); reloaded estimates " +
               (estimates_equal ? "equal in-memory estimates exactly" : "DIFFER"));
}

// ---------------------------------------------------------------------------
// criteria 4 and 8: continuous-treatment reproduction at desk scale, plus the
// latent prior matching of the same trained encoders

std::function<void(long long, const TraceRow&)> progress_printer(const std::string& label,
                                                                 long long total) {
    return [label, total](long long iter, const TraceRow&) {
        if (iter % 5000 == 0 || iter == total)
            note(label + ": iteration " + std::to_string(iter) + "/" + std::to_string(total));
    };
}

void check_desk_scale_reproduction() {
    std::vector<double> re, ro, rr;
    double worst_mean = 0.0, worst_sd_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ds = gen_hirano(10000, 50, seed);
        ModelConfig cfg;
        cfg.p = 50;
        cfg.seed = seed;
        const auto model = train_model(cfg, ds, nullptr,
                                       progress_printer("criterion 4, seed " +
                                                            std::to_string(seed),
                                                        cfg.iterations));
        const std::vector<double>& xs = ds.x.a;
        std::vector<double> mu_true(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) mu_true[i] = ds.oracle(xs[i]);
        re.push_back(rmse(mu_true, adrf_at_points(model, ds, xs)));
        ro.push_back(rmse(mu_true, ols_adrf(ds, xs).mu_hat));
        rr.push_back(rmse(mu_true, reg_adrf(ds, xs).mu_hat));
        note("criterion 4, seed " + std::to_string(seed) + ": curve rmse " + fmt(re.back()) +
             " (linear " + fmt(ro.back()) + ", quadratic " + fmt(rr.back()) + ")");

        // criterion 8 piggybacks on the same trainings: the encoded latents
        // should sit close to the standard-normal prior coordinate-wise
        const Mat z = model.encode(ds.v);
        for (int j = 0; j < z.cols; ++j) {
            double m = 0.0;
            for (int i = 0; i < z.rows; ++i) m += z(i, j);
            m /= z.rows;
            double var = 0.0;
            for (int i = 0; i < z.rows; ++i) var += (z(i, j) - m) * (z(i, j) - m);
            const double sd = std::sqrt(var / (z.rows - 1));
            worst_mean = std::max(worst_mean, std::abs(m));
            worst_sd_gap = std::max(worst_sd_gap, std::abs(sd - 1.0));
        }
    }
    int wins = 0;
    for (std::size_t i = 0; i < re.size(); ++i)
        if (re[i] < ro[i] && re[i] < rr[i]) ++wins;
    const double med = median5(re);
    report(4, med <= 0.15 && wins >= 4,
           "exponential-confounding curve at n=10000, p=50: median rmse " + fmt(med) +
               " over 5 seeds (need <= 0.15), below both regression baselines in " +
               std::to_string(wins) + "/5 seeds (need >= 4)");
    report(8, worst_mean < 0.3 && worst_sd_gap < 0.3,
           "encoded latent coordinates across the same 5 trainings: worst |mean| " +
               fmt(worst_mean) + ", worst |sd - 1| " + fmt(worst_sd_gap) + " (need < 0.3)");
}

// ---------------------------------------------------------------------------
// criterion 5: binary treatment with a constant effect of 2

void check_binary_effects() {
    int ate_hits = 0;
    double worst_pehe = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ds = gen_constant_effect_binary(10000, 20, 2.0, seed);
        ModelConfig cfg;
        cfg.p = 20;
        cfg.treatment = TreatmentKind::binary;
        cfg.partition = LatentPartition::defaults_for(TreatmentKind::binary);
        cfg.seed = seed;
        const auto model = train_model(cfg, ds, nullptr,
                                       progress_printer("criterion 5, seed " +
                                                            std::to_string(seed),
                                                        cfg.iterations));
        // predicted factuals keep outcome noise out of the per-sample effects;
        // with observed factuals the noise alone contributes 0.25 to the
        // squared-effect error and the threshold below would be unreachable
        const auto eff = estimate_binary_effects(model, ds, FactualSource::predicted);
        const std::vector<double> y1_true(eff.ite.size(), 2.0);
        const std::vector<double> y0_true(eff.ite.size(), 0.0);
        const double pehe = eps_pehe(y1_true, y0_true, eff.y1_hat, eff.y0_hat);
        if (std::abs(eff.ate - 2.0) < 0.1) ++ate_hits;
        worst_pehe = std::max(worst_pehe, pehe);
        note("criterion 5, seed " + std::to_string(seed) + ": ate " + fmt(eff.ate) +
             ", squared-effect error " + fmt(pehe));
    }
    report(5, ate_hits >= 4 && worst_pehe < 0.2,
           "constant effect 2 at n=10000, p=20: |ate - 2| < 0.1 in " + std::to_string(ate_hits) +
               "/5 seeds (need >= 4), worst squared-effect error " + fmt(worst_pehe) +
               " (need < 0.2)");
}

// ---------------------------------------------------------------------------
// criterion 6: removing the latent roundtrip must not improve the curve

void check_roundtrip_contribution() {
    std::vector<double> full_r, reduced_r;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ds = gen_sun(10000, 50, seed);
        const std::vector<double>& xs = ds.x.a;
        std::vector<double> mu_true(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) mu_true[i] = ds.oracle(xs[i]);
        for (bool roundtrip : {true, false}) {
            ModelConfig cfg;
            cfg.p = 50;
            cfg.seed = seed;
            cfg.use_roundtrip = roundtrip;
            cfg.use_v_gan = roundtrip;
            cfg.use_z_rec = roundtrip;
            const std::string label = "criterion 6, seed " + std::to_string(seed) +
                                      (roundtrip ? ", full" : ", no roundtrip");
            const auto model = train_model(cfg, ds, nullptr,
                                           progress_printer(label, cfg.iterations));
            const double r = rmse(mu_true, adrf_at_points(model, ds, xs));
            (roundtrip ? full_r : reduced_r).push_back(r);
            note(label + ": curve rmse " + fmt(r));
        }
    }
    const double med_full = median5(full_r);
    const double med_reduced = median5(reduced_r);
    report(6, med_full <= med_reduced,
           "sinusoidal-links data, 5 seeds: median curve rmse " + fmt(med_full) +
               " with the latent roundtrip vs " + fmt(med_reduced) + " without (need <=)");
}

// ---------------------------------------------------------------------------
// criterion 7: dimension-reduction floor, formula and trained gap

void check_dimension_reduction() {
    const auto design = make_appendix_b_design(42);
    const double formula = theoretical_rec_error(design, 13);
    // independent arithmetic for the trailing-eigenvalue sum: the last 37
    // eigenvalues are 0.1 - k/400 for k = 3..39, so the sum telescopes to
    // 3.7 - (3 + 4 + ... + 39)/400 with a Gauss sum in the numerator
    const double expected = 3.7 - (42.0 * 37.0 / 2.0) / 400.0;
    const bool formula_ok = close(formula, expected, 1e-9) && close(formula, 1.7575, 1e-9);

    AppendixBOptions opt;
    opt.progress = [&](int iter, double err) {
        if (iter % 5000 == 0)
            note("criterion 7: iteration " + std::to_string(iter) + "/" +
                 std::to_string(opt.iterations) + ", held-out error " + fmt(err));
    };
    const auto res = run_appendix_b_experiment(opt);
    const double ratio = res.best_holdout / formula;
    report(7, formula_ok && ratio <= 1.5,
           "reconstruction floor " + fmt(formula, 6) +
               " from the eigenvalue tail (reference text reports 1.907 for the same sum); "
               "trained held-out error " +
               fmt(res.best_holdout) + " at iteration " + std::to_string(res.best_iteration) +
               ", " + fmt(ratio, 3) + "x the floor (need <= 1.5)");
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
            return 2;
        }
    }
    auto wanted = [&](std::initializer_list<int> criteria) {
        if (only == 0) return true;
        for (int c : criteria)
            if (c == only) return true;
        return false;
    };
    try {
        if (wanted({1})) check_gradients();
        if (wanted({2})) check_oracles();
        if (wanted({10})) check_metric_units();
        if (wanted({3})) check_baselines();
        if (wanted({9})) check_determinism();
        if (wanted({4, 8})) check_desk_scale_reproduction();
        if (wanted({5})) check_binary_effects();
        if (wanted({6})) check_roundtrip_contribution();
        if (wanted({7})) check_dimension_reduction();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
        return 99;
    }
    std::printf("%d of %d criteria passed\n", g_run - g_failed, g_run);
    return g_failed;
}
