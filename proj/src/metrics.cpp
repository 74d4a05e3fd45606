#include "causalegm/metrics.hpp"

#include <cmath>

#include "causalegm/errors.hpp"

namespace cegm {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a == 0) throw ShapeError(std::string(what) + ": empty input");
    if (a != b)
        throw ShapeError(std::string(what) + ": length mismatch, " + std::to_string(a) + " vs " +
                         std::to_string(b));
}

constexpr double kMapeFloor = 1e-6;

}  // namespace

double rmse(const std::vector<double>& mu_true, const std::vector<double>& mu_hat) {
    require_same_length(mu_true.size(), mu_hat.size(), "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_true.size(); ++i) {
        const double d = mu_true[i] - mu_hat[i];
        acc += d * d;
    }
    return std::sqrt(acc / mu_true.size());
}

double mape(const std::vector<double>& mu_true, const std::vector<double>& mu_hat) {
    require_same_length(mu_true.size(), mu_hat.size(), "mape");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_true.size(); ++i) {
        if (std::fabs(mu_true[i]) <= kMapeFloor)
            throw ContractError("mape: true value at index " + std::to_string(i) +
                                " is within 1e-6 of zero; use the masked variant");
        acc += std::fabs((mu_true[i] - mu_hat[i]) / mu_true[i]);
    }
    return acc / mu_true.size();
}

MapeResult mape_masked(const std::vector<double>& mu_true, const std::vector<double>& mu_hat) {
    require_same_length(mu_true.size(), mu_hat.size(), "mape");
    MapeResult result;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_true.size(); ++i) {
        if (std::fabs(mu_true[i]) <= kMapeFloor) {
            ++result.n_excluded;
            continue;
        }
        acc += std::fabs((mu_true[i] - mu_hat[i]) / mu_true[i]);
        ++result.n_used;
    }
    if (result.n_used == 0) throw ContractError("mape: every true value is within 1e-6 of zero");
    result.value = acc / result.n_used;
    return result;
}

double mtef_bias(const std::function<double(double)>& mu_true,
                 const std::function<double(double)>& mu_hat, const std::vector<double>& xs,
                 double dx) {
    if (xs.empty()) throw ShapeError("mtef_bias: empty evaluation points");
    if (dx <= 0.0) throw ConfigError("mtef_bias: dx must be positive");
    double acc = 0.0;
    for (double x : xs) {
        const double slope_true = (mu_true(x + dx) - mu_true(x)) / dx;
        const double slope_hat = (mu_hat(x + dx) - mu_hat(x)) / dx;
        acc += std::fabs(slope_true - slope_hat);
    }
    return acc / xs.size();
}

double eps_ate(const std::vector<double>& y1_true, const std::vector<double>& y0_true,
               const std::vector<double>& y1_hat, const std::vector<double>& y0_hat) {
    require_same_length(y1_true.size(), y0_true.size(), "eps_ate");
    require_same_length(y1_true.size(), y1_hat.size(), "eps_ate");
    require_same_length(y1_true.size(), y0_hat.size(), "eps_ate");
    double ate_true = 0.0, ate_hat = 0.0;
    const double n = static_cast<double>(y1_true.size());
    for (std::size_t i = 0; i < y1_true.size(); ++i) {
        ate_true += (y1_true[i] - y0_true[i]) / n;
        ate_hat += (y1_hat[i] - y0_hat[i]) / n;
    }
    return std::fabs(ate_hat - ate_true);
}

double eps_pehe(const std::vector<double>& y1_true, const std::vector<double>& y0_true,
                const std::vector<double>& y1_hat, const std::vector<double>& y0_hat,
                bool rooted) {
    require_same_length(y1_true.size(), y0_true.size(), "eps_pehe");
    require_same_length(y1_true.size(), y1_hat.size(), "eps_pehe");
    require_same_length(y1_true.size(), y0_hat.size(), "eps_pehe");
    double acc = 0.0;
    for (std::size_t i = 0; i < y1_true.size(); ++i) {
        const double d = (y1_hat[i] - y0_hat[i]) - (y1_true[i] - y0_true[i]);
        acc += d * d;
    }
    acc /= y1_true.size();
    return rooted ? std::sqrt(acc) : acc;
}

MetricReport make_report(const std::string& metric, const std::vector<double>& per_seed) {
    if (per_seed.empty()) throw ShapeError("metric report needs at least one value");
    MetricReport report;
    report.metric = metric;
    report.per_seed = per_seed;
    for (double v : per_seed) report.mean += v / per_seed.size();
    if (per_seed.size() > 1) {
        double acc = 0.0;
        for (double v : per_seed) acc += (v - report.mean) * (v - report.mean);
        report.sd = std::sqrt(acc / (per_seed.size() - 1));
    }
    return report;
}

}  // namespace cegm
