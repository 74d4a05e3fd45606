#pragma once

#include <string>
#include <vector>

#include "causalegm/estimators.hpp"
#include "causalegm/model.hpp"

namespace cegm {

// Linear-regression baselines for the dose-response comparisons, plus the
// shared least-squares solver they are built on.

struct LinearFit {
    double intercept = 0.0;            // coefficient of the column named "intercept", if any
    std::vector<double> coef;          // aligned with the design columns
    std::vector<std::string> design;   // column names
};

// Minimizes ||y - design b||^2 via column-pivoted QR, using the design matrix
// exactly as given (callers append their own intercept column). names labels
// the columns; a rank-deficient design throws ContractError naming the
// columns the pivoting identified as collinear.
LinearFit solve_least_squares(const Mat& design, const std::vector<double>& y,
                              const std::vector<std::string>& names);

// Fits y ~ 1 + x + V and averages the fitted surface over the observed
// covariate rows: mu_hat(x) = b0 + b1 x + mean_i(v_i . beta).
AdrfEstimate ols_adrf(const Dataset& data, const std::vector<double>& x_grid);

// Same with a quadratic treatment polynomial: y ~ 1 + x + x^2 + V.
AdrfEstimate reg_adrf(const Dataset& data, const std::vector<double>& x_grid);

}  // namespace cegm
