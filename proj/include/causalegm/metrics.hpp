#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cegm {

// Evaluation metrics for estimated dose-response curves and binary effects.
// All functions are pure and throw ShapeError on length mismatches.

// sqrt of the mean squared difference
double rmse(const std::vector<double>& mu_true, const std::vector<double>& mu_hat);

// mean of |(mu - mu_hat) / mu|; refuses denominators at or below 1e-6 in
// magnitude rather than clamping them
double mape(const std::vector<double>& mu_true, const std::vector<double>& mu_hat);

// mape over the points where |mu| > 1e-6, for curves that cross zero;
// reports how many points were excluded
struct MapeResult {
    double value = 0.0;
    int n_used = 0;
    int n_excluded = 0;
};
MapeResult mape_masked(const std::vector<double>& mu_true, const std::vector<double>& mu_hat);

// mean absolute gap between the forward-difference slopes of the true and
// estimated curves, (mu(x+dx) - mu(x)) / dx, averaged over xs
double mtef_bias(const std::function<double(double)>& mu_true,
                 const std::function<double(double)>& mu_hat, const std::vector<double>& xs,
                 double dx = 1e-4);

// |mean(y1_hat - y0_hat) - mean(y1_true - y0_true)|
double eps_ate(const std::vector<double>& y1_true, const std::vector<double>& y0_true,
               const std::vector<double>& y1_hat, const std::vector<double>& y0_hat);

// mean of squared per-sample effect errors, exactly as defined (not rooted);
// rooted = true takes the square root for cross-convention comparisons
double eps_pehe(const std::vector<double>& y1_true, const std::vector<double>& y0_true,
                const std::vector<double>& y1_hat, const std::vector<double>& y0_hat,
                bool rooted = false);

// per-seed metric values with their mean and sample standard deviation
// (n-1 denominator, 0 for a single seed)
struct MetricReport {
    std::string metric;
    std::vector<double> per_seed;
    double mean = 0.0;
    double sd = 0.0;
};

MetricReport make_report(const std::string& metric, const std::vector<double>& per_seed);

}  // namespace cegm
