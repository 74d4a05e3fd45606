#include "causalegm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "causalegm/errors.hpp"

namespace cegm {

namespace {

void require_usable(const CausalEGMModel& model, const Dataset& data) {
    if (model.e_net.layers.empty() || model.f_net.layers.empty())
        throw ContractError("model has no encoder or outcome network; train or load one first");
    data.validate();
    if (data.v.cols != model.cfg.p)
        throw ShapeError("covariate dimension mismatch: data has " + std::to_string(data.v.cols) +
                         ", model expects " + std::to_string(model.cfg.p));
}

void require_binary(const CausalEGMModel& model, const Dataset& data) {
    if (model.cfg.treatment != TreatmentKind::binary)
        throw ContractError("counterfactual outcomes need a binary-treatment model");
    for (int i = 0; i < data.x.rows; ++i)
        if (data.x(i, 0) != 0.0 && data.x(i, 0) != 1.0)
            throw ContractError("treatment value at row " + std::to_string(i) +
                                " is not 0 or 1");
}

double column_mean(const Mat& m) {
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) acc += m(i, 0);
    return acc / m.rows;
}

// exact curve values over already-encoded features
std::vector<double> curve_on(const CausalEGMModel& model, const Mat& z,
                             const std::vector<double>& xs) {
    std::vector<double> out(xs.size());
    Mat x_col(z.rows, 1);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        x_col.fill(xs[k]);
        out[k] = column_mean(model.predict_outcome(x_col, z));
    }
    return out;
}

}  // namespace

void AdrfEstimate::validate() const {
    if (x_grid.size() != mu_hat.size())
        throw ShapeError("adrf estimate: grid and value lengths differ");
    if (x_grid.empty()) throw ShapeError("adrf estimate: empty grid");
    if (n_used < 1) throw ShapeError("adrf estimate: no samples used");
    for (double v : x_grid)
        if (!std::isfinite(v)) throw ContractError("adrf estimate: non-finite grid value");
    for (double v : mu_hat)
        if (!std::isfinite(v)) throw ContractError("adrf estimate: non-finite curve value");
}

AdrfEstimate estimate_adrf(const CausalEGMModel& model, const Dataset& data,
                           const std::vector<double>& x_grid) {
    require_usable(model, data);
    if (x_grid.empty()) throw ConfigError("adrf grid must be non-empty");
    const Mat z = model.encode(data.v);
    AdrfEstimate estimate;
    estimate.x_grid = x_grid;
    estimate.mu_hat = curve_on(model, z, x_grid);
    estimate.n_used = data.v.rows;
    estimate.validate();
    return estimate;
}

std::vector<double> adrf_at_points(const CausalEGMModel& model, const Dataset& data,
                                   const std::vector<double>& xs, std::size_t exact_threshold) {
    require_usable(model, data);
    if (xs.empty()) throw ConfigError("adrf evaluation points must be non-empty");
    const Mat z = model.encode(data.v);

    std::vector<double> unique_xs = xs;
    std::sort(unique_xs.begin(), unique_xs.end());
    unique_xs.erase(std::unique(unique_xs.begin(), unique_xs.end()), unique_xs.end());

    if (unique_xs.size() <= exact_threshold) {
        const auto values = curve_on(model, z, unique_xs);
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto it = std::lower_bound(unique_xs.begin(), unique_xs.end(), xs[i]);
            out[i] = values[static_cast<std::size_t>(it - unique_xs.begin())];
        }
        return out;
    }

    // quantile grid over the requested points; the curve is smooth and the
    // grid is dense exactly where the points are, so linear interpolation
    // stays far below training error while avoiding a quadratic sweep
    constexpr std::size_t kGridPoints = 129;
    std::vector<double> grid;
    grid.reserve(kGridPoints);
    for (std::size_t k = 0; k < kGridPoints; ++k) {
        const std::size_t pos = k * (unique_xs.size() - 1) / (kGridPoints - 1);
        grid.push_back(unique_xs[pos]);
    }
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const auto grid_values = curve_on(model, z, grid);

    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        const auto hi = std::upper_bound(grid.begin(), grid.end(), x);
        if (hi == grid.begin()) {
            out[i] = grid_values.front();
        } else if (hi == grid.end()) {
            out[i] = grid_values.back();
        } else {
            const std::size_t j = static_cast<std::size_t>(hi - grid.begin());
            const double x0 = grid[j - 1], x1 = grid[j];
            const double w = (x - x0) / (x1 - x0);
            out[i] = (1.0 - w) * grid_values[j - 1] + w * grid_values[j];
        }
    }
    return out;
}

std::vector<double> counterfactual_outcomes(const CausalEGMModel& model, const Dataset& data) {
    require_usable(model, data);
    require_binary(model, data);
    const Mat z = model.encode(data.v);
    Mat flipped(data.x.rows, 1);
    for (int i = 0; i < data.x.rows; ++i) flipped(i, 0) = 1.0 - data.x(i, 0);
    const Mat cf = model.predict_outcome(flipped, z);
    return {cf.a.begin(), cf.a.end()};
}

BinaryEffects estimate_binary_effects(const CausalEGMModel& model, const Dataset& data,
                                      FactualSource factual) {
    const std::vector<double> cf = counterfactual_outcomes(model, data);
    const int n = data.x.rows;
    std::vector<double> factual_values(n);
    if (factual == FactualSource::observed) {
        for (int i = 0; i < n; ++i) factual_values[i] = data.y(i, 0);
    } else {
        const Mat z = model.encode(data.v);
        const Mat pred = model.predict_outcome(data.x, z);
        for (int i = 0; i < n; ++i) factual_values[i] = pred(i, 0);
    }

    BinaryEffects effects;
    effects.y1_hat.resize(n);
    effects.y0_hat.resize(n);
    effects.ite.resize(n);
    for (int i = 0; i < n; ++i) {
        const bool treated = data.x(i, 0) == 1.0;
        effects.y1_hat[i] = treated ? factual_values[i] : cf[i];
        effects.y0_hat[i] = treated ? cf[i] : factual_values[i];
        effects.ite[i] = effects.y1_hat[i] - effects.y0_hat[i];
        effects.ate += effects.ite[i];
    }
    effects.ate /= n;
    return effects;
}

}  // namespace cegm
