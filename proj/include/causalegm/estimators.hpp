#pragma once

#include <vector>

#include "causalegm/model.hpp"

namespace cegm {

// Estimands computed from a trained model: the average dose-response curve,
// per-sample counterfactuals, and treatment effects.

struct AdrfEstimate {
    std::vector<double> x_grid;
    std::vector<double> mu_hat;
    int n_used = 0;  // rows averaged at each grid point

    void validate() const;  // matching lengths, finite values
};

// mu_hat(x) = mean over samples of F(x, z0_i, z1_i) with each sample's own
// encoded features; exact at every grid point
AdrfEstimate estimate_adrf(const CausalEGMModel& model, const Dataset& data,
                           const std::vector<double>& x_grid);

// The curve evaluated at arbitrary points, typically the observed treatments.
// Above exact_threshold points the curve is computed exactly on an
// evenly-weighted quantile grid of the requested points (plus their extremes)
// and interpolated linearly, which keeps metric evaluation at n observed
// treatments from costing n^2 outcome-net sweeps. Pass exact_threshold >=
// xs.size() to force the exact path.
std::vector<double> adrf_at_points(const CausalEGMModel& model, const Dataset& data,
                                   const std::vector<double>& xs,
                                   std::size_t exact_threshold = 512);

// y_cf_i = F(1 - x_i, z0_i, z1_i): the outcome net evaluated at the flipped
// treatment with the sample's own latent features. Binary treatment only.
std::vector<double> counterfactual_outcomes(const CausalEGMModel& model, const Dataset& data);

// Whether the factual potential outcome is the observed y or the model's own
// prediction F(x_i, z0_i, z1_i); the counterfactual is always imputed.
enum class FactualSource { observed, predicted };

struct BinaryEffects {
    std::vector<double> y1_hat;
    std::vector<double> y0_hat;
    std::vector<double> ite;  // y1_hat - y0_hat per sample
    double ate = 0.0;         // mean of ite
};

BinaryEffects estimate_binary_effects(const CausalEGMModel& model, const Dataset& data,
                                      FactualSource factual = FactualSource::observed);

}  // namespace cegm
