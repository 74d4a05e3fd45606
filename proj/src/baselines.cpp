#include "causalegm/baselines.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>

#include "causalegm/errors.hpp"

namespace cegm {

namespace {

// builds the shared part of both baselines: a design of treatment polynomial
// columns followed by all covariates, and the fitted curve averaged over the
// observed covariate rows
AdrfEstimate polynomial_baseline(const Dataset& data, const std::vector<double>& x_grid,
                                 int degree) {
    data.validate();
    if (x_grid.empty()) throw ConfigError("adrf grid must be non-empty");
    const int n = data.v.rows, p = data.v.cols;
    if (n <= p + degree + 1)
        throw ContractError("need more than " + std::to_string(p + degree + 1) +
                            " rows to fit " + std::to_string(p + degree + 1) +
                            " coefficients, got " + std::to_string(n));

    Mat design(n, 1 + degree + p);
    std::vector<std::string> names;
    names.push_back("intercept");
    for (int d = 1; d <= degree; ++d) names.push_back(d == 1 ? "x" : "x" + std::to_string(d));
    for (int j = 0; j < p; ++j) names.push_back("v" + std::to_string(j + 1));
    for (int i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        double pow_x = 1.0;
        for (int d = 1; d <= degree; ++d) {
            pow_x *= data.x(i, 0);
            design(i, d) = pow_x;
        }
        for (int j = 0; j < p; ++j) design(i, 1 + degree + j) = data.v(i, j);
    }
    const std::vector<double> y(data.y.a.begin(), data.y.a.end());
    const LinearFit fit = solve_least_squares(design, y, names);

    // the covariate part only enters through its average over the sample
    double covariate_term = 0.0;
    for (int j = 0; j < p; ++j) {
        double mean_vj = 0.0;
        for (int i = 0; i < n; ++i) mean_vj += data.v(i, j) / n;
        covariate_term += mean_vj * fit.coef[1 + degree + j];
    }

    AdrfEstimate estimate;
    estimate.x_grid = x_grid;
    estimate.n_used = n;
    estimate.mu_hat.reserve(x_grid.size());
    for (double x : x_grid) {
        double mu = fit.coef[0] + covariate_term;
        double pow_x = 1.0;
        for (int d = 1; d <= degree; ++d) {
            pow_x *= x;
            mu += fit.coef[d] * pow_x;
        }
        estimate.mu_hat.push_back(mu);
    }
    estimate.validate();
    return estimate;
}

}  // namespace

LinearFit solve_least_squares(const Mat& design, const std::vector<double>& y,
                              const std::vector<std::string>& names) {
    const int n = design.rows, k = design.cols;
    if (static_cast<int>(y.size()) != n)
        throw ShapeError("least squares: " + std::to_string(n) + " design rows vs " +
                         std::to_string(y.size()) + " responses");
    if (static_cast<int>(names.size()) != k)
        throw ShapeError("least squares: " + std::to_string(k) + " columns vs " +
                         std::to_string(names.size()) + " names");
    if (n < k) throw ContractError("least squares: fewer rows than columns");

    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) a(i, j) = design(i, j);
        b(i) = y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < k) {
        // pivoting pushes the dependent columns to the back of the permutation
        const auto& perm = qr.colsPermutation().indices();
        std::string dropped;
        for (int j = static_cast<int>(qr.rank()); j < k; ++j) {
            if (!dropped.empty()) dropped += ", ";
            dropped += names[perm(j)];
        }
        throw ContractError("rank-deficient design, collinear columns: " + dropped);
    }
    const Eigen::VectorXd coef = qr.solve(b);

    LinearFit fit;
    fit.design = names;
    fit.coef.resize(k);
    for (int j = 0; j < k; ++j) {
        if (!std::isfinite(coef(j))) throw ContractError("least squares produced a non-finite coefficient");
        fit.coef[j] = coef(j);
        if (names[j] == "intercept") fit.intercept = coef(j);
    }
    return fit;
}

AdrfEstimate ols_adrf(const Dataset& data, const std::vector<double>& x_grid) {
    return polynomial_baseline(data, x_grid, 1);
}

AdrfEstimate reg_adrf(const Dataset& data, const std::vector<double>& x_grid) {
    return polynomial_baseline(data, x_grid, 2);
}

}  // namespace cegm
