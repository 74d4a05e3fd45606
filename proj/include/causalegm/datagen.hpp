#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "causalegm/model.hpp"

namespace cegm {

enum class DataKind { hirano, sun, colangelo, twins, constant_binary };

std::string to_string(DataKind kind);
DataKind data_kind_from_string(const std::string& name);

// Closed-form average dose-response curve for a generator. The twins curve
// carries the realized mean of v*gamma as an additive offset; the constant
// effect generator carries its effect size tau. Both default to values that
// make the plain formulas come out.
struct AdrfOracle {
    DataKind kind = DataKind::hirano;
    double offset = 0.0;
    double tau = 0.0;

    double operator()(double x) const;
};

struct SyntheticDataset : Dataset {
    DataKind kind = DataKind::hirano;
    std::uint64_t seed = 0;
    AdrfOracle oracle;
};

// Covariates are unit exponentials; the treatment is exponential with rate
// v1+v2 and the outcome is x + (v1+v3)*exp(-x*(v1+v3)) plus unit noise.
// mu(x) = x + 2/(1+x)^3. Requires p >= 3.
SyntheticDataset gen_hirano(int n, int p, std::uint64_t seed);

// Standard-normal covariates pushed through the six fixed link functions;
// mu(x) = x + 0.5 + exp(-0.5). Requires p >= 6.
SyntheticDataset gen_sun(int n, int p, std::uint64_t seed);

// The sun link functions f1..f6 (k in 1..6) and the colangelo confounding
// coefficients theta_j = 1/j^2 (j >= 1), exposed so the design constants can
// be checked directly.
double sun_link(int k, double u);
double colangelo_theta(int j);

// Covariates from N(0, Sigma) with unit diagonal and 0.5 on the first
// off-diagonals; treatment Phi(3 v'theta) + 0.75 e1 - 0.5 with theta_j = 1/j^2;
// mu(x) = 1.2x + x^3. Requires p >= 1.
SyntheticDataset gen_colangelo(int n, int p, std::uint64_t seed);

// Risk-outcome simulation over a supplied covariate matrix: per-column
// gamma ~ N(0, 0.025^2), response r = -2/(1+exp(-3x)) + v.gamma + N(0, 0.25^2).
// The treatment stands in for birth weight and is drawn uniform on [0, 2].
// mu(x) = -2/(1+exp(-3x)) + mean(v.gamma over the given rows).
SyntheticDataset gen_twins_style(const Mat& covariates, std::uint64_t seed);

// Same simulation over standard-normal stand-in covariates.
SyntheticDataset gen_twins_style(int n, int p, std::uint64_t seed);

// Binary treatment with a known homogeneous effect: x ~ Bernoulli(sigmoid(v1)),
// y = tau*x + v1 + N(0, 0.5^2), so ATE = ITE = tau exactly.
SyntheticDataset gen_constant_effect_binary(int n, int p, double tau, std::uint64_t seed);

// Kind-dispatched generation for the CLI; tau only applies to constant_binary.
SyntheticDataset generate(DataKind kind, int n, int p, double tau, std::uint64_t seed);

// Draws of the potential outcome Y(x) at a fixed treatment level over fresh
// covariates and noise. Averaging these is the definitional Monte-Carlo check
// of the oracle curves: the conditional mean E[Y | X near x] would not do,
// because treatment and outcome share covariates in every generator here.
// tau only matters for constant_binary.
std::vector<double> draw_potential_outcomes(DataKind kind, double x, int n, int p,
                                            std::uint64_t seed, double tau = 1.0);

// Gaussian dimension-reduction design: 50 ambient dimensions whose covariance
// U diag(lambda) U' has 13 dominant eigenvalues, a uniform(-1,1) mean, and a
// seeded random orthonormal basis.
struct AppendixBDesign {
    int p = 50;
    int q = 13;
    std::vector<double> lambda;  // descending, all positive
    Mat mu;                      // 1 x p
    Mat u;                       // p x p, orthonormal columns
};

AppendixBDesign make_appendix_b_design(std::uint64_t seed);

// n x p sample of V = mu + U diag(sqrt(lambda)) W with W standard normal.
Mat gen_appendix_b(const AppendixBDesign& design, int n, std::uint64_t seed);

// T = diag(1/sqrt(lambda)) U' (V - mu), the whitened coordinates, and its
// inverse. whiten(unwhiten(t)) is exact up to roundoff.
Mat whiten(const AppendixBDesign& design, const Mat& v);
Mat unwhiten(const AppendixBDesign& design, const Mat& t);

// The three frozen encoder outputs: unit-variance combinations of whitened
// coordinates (t8+t11)/sqrt(2), (t9+t12..20)/sqrt(10), (t10+t22..30)/sqrt(10),
// indexed from 1 as in the design write-up.
Mat fixed_features(const AppendixBDesign& design, const Mat& v);

// Best achievable reconstruction error from any q-dimensional feature,
// sum of the trailing p-q eigenvalues. Requires 1 <= q < p.
double theoretical_rec_error(const AppendixBDesign& design, int q);

struct AppendixBOptions {
    int n_train = 50000;
    int n_holdout = 10000;
    std::uint64_t seed = 42;
    int iterations = 40000;
    int eval_every = 500;
    int batch_size = 128;
    double lr = 1e-3;
    // called after each held-out evaluation with (iteration, holdout error)
    std::function<void(int, double)> progress;
};

struct AppendixBResult {
    double theoretical = 0.0;   // formula value at q = 13
    double best_holdout = 0.0;  // minimum held-out reconstruction error seen
    int best_iteration = 0;
    double delta = 0.0;  // best_holdout - theoretical
    std::vector<std::pair<int, double>> checkpoints;  // (iteration, held-out error)
};

// Trains the partially fixed encoder (three frozen features plus a trainable
// ten-output network) with a decoder minimizing reconstruction error, and
// reports how close the held-out error gets to the theoretical floor.
AppendixBResult run_appendix_b_experiment(const AppendixBOptions& opt);

}  // namespace cegm
