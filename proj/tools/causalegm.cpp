// Command line driver: simulate data, train models, estimate effects, run
// multi-seed benchmarks and the dimension-reduction experiment. Every output
// CSV records the config hash and seed it came from, so any artifact can be
// regenerated from its own header comments.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "causalegm/baselines.hpp"
#include "causalegm/csv.hpp"
#include "causalegm/datagen.hpp"
#include "causalegm/errors.hpp"
#include "causalegm/estimators.hpp"
#include "causalegm/metrics.hpp"
#include "causalegm/model.hpp"
#include "causalegm/runconfig.hpp"

namespace fs = std::filesystem;
using namespace cegm;

namespace {

// step used for the marginal-effect slope metric
constexpr double kMtefDx = 1e-4;

struct CliOptions {
    std::string config_path;
    std::string out;
    std::string dataset;
    std::string data_path;
    std::string model_path;
    std::string grid_spec;
    std::string mode;
    std::string factual;
    std::string treatment;
    int n = 0;
    int p = 0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    long long iterations = 0;
    int jobs = 1;
};

// whether the user passed an option this subcommand actually defines
bool passed(const CLI::App& cmd, const std::string& name) {
    const CLI::Option* option = cmd.get_option_no_throw(name);
    return option && option->count() > 0;
}

RunConfig load_config(const CLI::App& cmd, const CliOptions& opt) {
    RunConfig cfg = opt.config_path.empty() ? RunConfig{} : parse_run_config(opt.config_path);
    if (passed(cmd, "--dataset")) cfg.dataset = data_kind_from_string(opt.dataset);
    if (passed(cmd, "--n")) cfg.n = opt.n;
    if (passed(cmd, "--p")) {
        cfg.p = opt.p;
        cfg.model.p = opt.p;
    }
    if (passed(cmd, "--tau")) cfg.tau = opt.tau;
    if (passed(cmd, "--seed")) {
        cfg.model.seed = opt.seed;
        cfg.seeds = {opt.seed};
    }
    if (passed(cmd, "--iterations")) {
        cfg.model.iterations = opt.iterations;
        cfg.ab_iterations = static_cast<int>(opt.iterations);
    }
    if (passed(cmd, "--out")) cfg.out_dir = opt.out;
    if (passed(cmd, "--data")) cfg.data_csv = opt.data_path;
    if (passed(cmd, "--treatment")) {
        if (opt.treatment == "continuous")
            cfg.model.treatment = TreatmentKind::continuous;
        else if (opt.treatment == "binary")
            cfg.model.treatment = TreatmentKind::binary;
        else
            throw ConfigError("treatment must be 'continuous' or 'binary', got '" +
                              opt.treatment + "'");
        cfg.model.partition = LatentPartition::defaults_for(cfg.model.treatment);
    }
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// the model treatment kind has to agree with the generator producing the data
void check_treatment_matches(const RunConfig& cfg) {
    const bool binary_data = cfg.dataset == DataKind::constant_binary;
    const bool binary_model = cfg.model.treatment == TreatmentKind::binary;
    if (binary_data != binary_model)
        throw ConfigError("dataset '" + to_string(cfg.dataset) + "' needs 'treatment = " +
                          std::string(binary_data ? "binary" : "continuous") + "'");
}

std::vector<double> oracle_grid(const Dataset& data, int points = 201) {
    double lo = data.x(0, 0), hi = data.x(0, 0);
    for (int i = 1; i < data.n(); ++i) {
        lo = std::min(lo, data.x(i, 0));
        hi = std::max(hi, data.x(i, 0));
    }
    lo = std::min(0.0, lo);
    std::vector<double> grid;
    grid.reserve(points);
    for (int k = 0; k < points; ++k)
        grid.push_back(lo + (hi - lo) * static_cast<double>(k) / (points - 1));
    return grid;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CLI::App& cmd, const CliOptions& opt) {
    RunConfig cfg = load_config(cmd, opt);
    const SyntheticDataset data =
        generate(cfg.dataset, cfg.n, cfg.p, cfg.tau, cfg.model.seed);

    std::string data_path;
    if (passed(cmd, "--out") && opt.out.size() > 4 &&
        opt.out.substr(opt.out.size() - 4) == ".csv") {
        data_path = opt.out;
    } else {
        ensure_dir(cfg.out_dir);
        data_path = join_path(cfg.out_dir, to_string(cfg.dataset) + "_seed" +
                                               std::to_string(cfg.model.seed) + ".csv");
    }
    if (const fs::path parent = fs::path(data_path).parent_path(); !parent.empty())
        ensure_dir(parent.string());
    std::string oracle_path = data_path;
    oracle_path.replace(oracle_path.size() - 4, 4, "_oracle.csv");

    const std::vector<std::string> comments = {
        "config " + config_hash(cfg),
        "seed " + std::to_string(cfg.model.seed),
        "dataset " + to_string(cfg.dataset),
    };
    write_dataset_csv(data_path, data, comments);

    std::vector<std::vector<std::string>> rows;
    for (double x : oracle_grid(data))
        rows.push_back({format_double(x), format_double(data.oracle(x))});
    write_table_csv(oracle_path, {"x", "mu"}, rows, comments);

    std::printf("wrote %s (n=%d, p=%d) and %s\n", data_path.c_str(), data.n(), data.p(),
                oracle_path.c_str());
    return 0;
}

// ------------------------------------------------------------------- train

Dataset load_training_data(RunConfig& cfg) {
    if (!cfg.data_csv.empty()) {
        Dataset data = read_dataset_csv(cfg.data_csv);
        cfg.p = data.p();
        cfg.model.p = data.p();
        return data;
    }
    check_treatment_matches(cfg);
    return generate(cfg.dataset, cfg.n, cfg.p, cfg.tau, cfg.model.seed);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     const std::vector<std::string>& comments) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const TraceRow& r = trace[i];
        rows.push_back({std::to_string(i + 1), format_double(r.gan_e), format_double(r.gan_g),
                        format_double(r.gan_dz), format_double(r.gan_dv),
                        format_double(r.rec_v), format_double(r.rec_z), format_double(r.mse_f),
                        format_double(r.mse_h)});
    }
    write_table_csv(path,
                    {"iter", "gan_e", "gan_g", "gan_dz", "gan_dv", "rec_v", "rec_z", "mse_f",
                     "mse_h"},
                    rows, comments);
}

int cmd_train(const CLI::App& cmd, const CliOptions& opt) {
    RunConfig cfg = load_config(cmd, opt);
    const Dataset data = load_training_data(cfg);
    ensure_dir(cfg.out_dir);

    std::vector<TraceRow> trace;
    const CausalEGMModel model =
        train_model(cfg.model, data, &trace, [&](long long iter, const TraceRow& row) {
            std::fprintf(stderr, "iter %lld/%lld  rec_v %.4f  mse_f %.4f  mse_h %.4f\n", iter,
                         cfg.model.iterations, row.rec_v, row.mse_f, row.mse_h);
        });

    const std::vector<std::string> comments = {
        "config " + config_hash(cfg),
        "seed " + std::to_string(cfg.model.seed),
        "n " + std::to_string(data.n()) + " p " + std::to_string(data.p()),
    };
    const std::string model_path = join_path(cfg.out_dir, "model.bin");
    const std::string trace_path = join_path(cfg.out_dir, "trace.csv");
    save_model(model, model_path);
    write_trace_csv(trace_path, trace, comments);

    const TraceRow& last = trace.empty() ? TraceRow{} : trace.back();
    std::printf("trained %lld iterations; model -> %s, trace -> %s, final mse_f %.6f\n",
                cfg.model.iterations, model_path.c_str(), trace_path.c_str(), last.mse_f);
    return 0;
}

// ---------------------------------------------------------------- estimate

int cmd_estimate(const CLI::App& cmd, const CliOptions& opt) {
    const CausalEGMModel model = load_model(opt.model_path);
    const Dataset data = read_dataset_csv(opt.data_path);
    const std::string out_dir = passed(cmd, "--out") ? opt.out : ".";
    ensure_dir(out_dir);

    const bool binary = model.cfg.treatment == TreatmentKind::binary;
    std::string mode = opt.mode;
    if (mode.empty()) mode = binary ? "effects" : "adrf";
    if (mode == "adrf" && binary)
        throw ContractError("adrf mode needs a continuous-treatment model; this one is binary");

    std::vector<std::string> comments = {
        "model " + opt.model_path,
        "data " + opt.data_path,
        "seed " + std::to_string(model.cfg.seed),
    };

    if (mode == "adrf") {
        const std::vector<double> grid =
            opt.grid_spec.empty() ? oracle_grid(data) : parse_grid(opt.grid_spec);
        comments.push_back("grid " + (opt.grid_spec.empty() ? std::string("auto")
                                                            : opt.grid_spec));
        const AdrfEstimate est = estimate_adrf(model, data, grid);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < est.x_grid.size(); ++k)
            rows.push_back({format_double(est.x_grid[k]), format_double(est.mu_hat[k])});
        const std::string path = join_path(out_dir, "adrf.csv");
        write_table_csv(path, {"x", "mu_hat"}, rows, comments);
        std::printf("wrote %s (%zu grid points, n=%d)\n", path.c_str(), est.x_grid.size(),
                    est.n_used);
        return 0;
    }
    if (mode != "effects")
        throw ConfigError("mode must be 'adrf' or 'effects', got '" + mode + "'");

    FactualSource factual = FactualSource::observed;
    if (opt.factual == "predicted")
        factual = FactualSource::predicted;
    else if (!opt.factual.empty() && opt.factual != "observed")
        throw ConfigError("factual must be 'observed' or 'predicted', got '" + opt.factual +
                          "'");

    const BinaryEffects eff = estimate_binary_effects(model, data, factual);
    comments.push_back("ate " + format_double(eff.ate));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < eff.ite.size(); ++i)
        rows.push_back({format_double(data.x(static_cast<int>(i), 0)),
                        format_double(eff.y1_hat[i]), format_double(eff.y0_hat[i]),
                        format_double(eff.ite[i])});
    const std::string path = join_path(out_dir, "effects.csv");
    write_table_csv(path, {"x", "y1_hat", "y0_hat", "ite"}, rows, comments);
    std::printf("wrote %s; ate %s\n", path.c_str(), format_double(eff.ate).c_str());
    return 0;
}

// --------------------------------------------------------------- benchmark

// piecewise-linear truth curve read from an oracle sidecar file; the end
// segments extend past the tabulated range so slope metrics stay sensible
struct OracleCurve {
    std::vector<double> xs, mus;

    double operator()(double x) const {
        if (xs.size() == 1) return mus.front();
        std::size_t hi = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
        hi = std::clamp<std::size_t>(hi, 1, xs.size() - 1);
        const double t = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
        return mus[hi - 1] + t * (mus[hi] - mus[hi - 1]);
    }
};

OracleCurve read_oracle_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    OracleCurve curve;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "x,mu")
                throw ParseError("oracle file header must be 'x,mu', got '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("oracle file line " + std::to_string(line_no) +
                             ": expected 'x,mu' values");
        char* end = nullptr;
        const double x = std::strtod(line.c_str(), &end);
        const double mu = std::strtod(line.c_str() + comma + 1, &end);
        if (!std::isfinite(x) || !std::isfinite(mu))
            throw ParseError("oracle file line " + std::to_string(line_no) +
                             ": non-finite value");
        curve.xs.push_back(x);
        curve.mus.push_back(mu);
    }
    if (curve.xs.empty()) throw ParseError("'" + path + "' has no oracle rows");
    for (std::size_t k = 1; k < curve.xs.size(); ++k)
        if (curve.xs[k] <= curve.xs[k - 1])
            throw ParseError("oracle file treatment values must be strictly increasing");
    return curve;
}

struct MethodSpec {
    std::string name;
    enum Kind { egm, ols, reg } kind = egm;
    ModelConfig model;
    // emits the previous method's numbers under this name instead of
    // retraining; used for the full model's alias row in the ablation table
    bool alias_of_full = false;
};

std::vector<MethodSpec> build_methods(const RunConfig& cfg, bool binary) {
    std::vector<MethodSpec> methods;
    if (cfg.run_causalegm) methods.push_back({"CausalEGM", MethodSpec::egm, cfg.model, false});
    if (cfg.run_causalegm && cfg.run_ablations) {
        ModelConfig no_rt = cfg.model;
        no_rt.use_roundtrip = false;
        no_rt.use_v_gan = false;
        no_rt.use_z_rec = false;
        methods.push_back({"CausalEGM w/o RT", MethodSpec::egm, no_rt, false});
        // (V-GAN, Z-Rec) on/off grid; (1,1) is the full model again
        methods.push_back({"CausalEGM (1,1)", MethodSpec::egm, cfg.model, true});
        for (const auto& [label, v_gan, z_rec] :
             {std::tuple<const char*, bool, bool>{"CausalEGM (0,1)", false, true},
              {"CausalEGM (1,0)", true, false},
              {"CausalEGM (0,0)", false, false}}) {
            ModelConfig m = cfg.model;
            m.use_v_gan = v_gan;
            m.use_z_rec = z_rec;
            methods.push_back({label, MethodSpec::egm, m, false});
        }
    }
    if (!binary) {
        if (cfg.run_ols) methods.push_back({"OLS", MethodSpec::ols, {}, false});
        if (cfg.run_reg) methods.push_back({"REG", MethodSpec::reg, {}, false});
    }
    return methods;
}

struct SeedResult {
    // (method, metric, value) in the fixed method/metric order
    std::vector<std::tuple<std::string, std::string, double>> rows;
    // per-method curve on the shared plot grid, when one was requested
    std::vector<std::pair<std::string, std::vector<double>>> curves;
    std::vector<double> curve_truth;
};

// treatment values the curve metrics are evaluated at: every observed x,
// optionally trimmed to the central [q01, q99] range where the curve is
// supported by data
std::vector<double> metric_points(const Dataset& data, bool trim) {
    std::vector<double> xs(data.n());
    for (int i = 0; i < data.n(); ++i) xs[i] = data.x(i, 0);
    if (!trim) return xs;
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const auto order_stat = [&](double q) {
        return sorted[static_cast<std::size_t>(q * (sorted.size() - 1))];
    };
    const double lo = order_stat(0.01), hi = order_stat(0.99);
    std::vector<double> kept;
    kept.reserve(xs.size());
    for (double x : xs)
        if (x >= lo && x <= hi) kept.push_back(x);
    return kept;
}

SeedResult run_benchmark_seed(const RunConfig& cfg, std::uint64_t seed,
                              const std::vector<MethodSpec>& methods,
                              const std::vector<double>& plot_grid,
                              const Dataset* csv_data, const OracleCurve* csv_oracle) {
    // either a fresh draw from the configured generator, or the ingested
    // dataset (shared across seeds, only the training seed varies)
    SyntheticDataset synth;
    const Dataset* source = csv_data;
    std::function<double(double)> oracle;
    bool binary = false;
    double ite_true = 0.0;
    if (csv_data) {
        binary = cfg.model.treatment == TreatmentKind::binary;
        oracle = [curve = *csv_oracle](double x) { return curve(x); };
        ite_true = (*csv_oracle)(1.0) - (*csv_oracle)(0.0);
    } else {
        synth = generate(cfg.dataset, cfg.n, cfg.p, cfg.tau, seed);
        source = &synth;
        binary = cfg.dataset == DataKind::constant_binary;
        oracle = [o = synth.oracle](double x) { return o(x); };
        ite_true = synth.oracle.tau;
    }
    const Dataset& data = *source;

    SeedResult result;
    if (!plot_grid.empty()) {
        result.curve_truth.reserve(plot_grid.size());
        for (double x : plot_grid) result.curve_truth.push_back(oracle(x));
    }

    std::vector<double> xs, mu_true, eval_points;
    if (!binary) {
        xs = metric_points(data, cfg.metric_trim);
        mu_true.reserve(xs.size());
        for (double x : xs) mu_true.push_back(oracle(x));
        // one evaluation pass covers both the curve values and the shifted
        // points the slope metric will ask for
        eval_points = xs;
        for (double x : xs) eval_points.push_back(x + kMtefDx);
    }

    // the true potential outcomes enter the error metrics only through their
    // difference, which is constant by construction in both truth sources
    std::vector<double> y1_true, y0_true;
    if (binary) {
        y1_true.assign(static_cast<std::size_t>(data.n()), ite_true);
        y0_true.assign(static_cast<std::size_t>(data.n()), 0.0);
    }

    std::vector<std::tuple<std::string, std::string, double>> full_model_rows;
    for (const MethodSpec& method : methods) {
        if (method.alias_of_full) {
            for (const auto& [name, metric, value] : full_model_rows)
                result.rows.emplace_back(method.name, metric, value);
            if (!plot_grid.empty() && !result.curves.empty())
                result.curves.emplace_back(method.name, result.curves.front().second);
            continue;
        }

        std::vector<double> hat_at_eval, curve;
        double ate_err = 0.0, pehe = 0.0;
        if (method.kind == MethodSpec::egm) {
            ModelConfig mcfg = method.model;
            mcfg.p = data.p();
            mcfg.seed = seed;
            const CausalEGMModel model = train_model(mcfg, data);
            if (binary) {
                const BinaryEffects eff = estimate_binary_effects(model, data, cfg.factual);
                ate_err = eps_ate(y1_true, y0_true, eff.y1_hat, eff.y0_hat);
                pehe = eps_pehe(y1_true, y0_true, eff.y1_hat, eff.y0_hat, cfg.pehe_rooted);
            } else {
                hat_at_eval = adrf_at_points(model, data, eval_points);
                if (!plot_grid.empty()) curve = estimate_adrf(model, data, plot_grid).mu_hat;
            }
        } else {
            const auto fit = method.kind == MethodSpec::ols ? ols_adrf : reg_adrf;
            hat_at_eval = fit(data, eval_points).mu_hat;
            if (!plot_grid.empty()) curve = fit(data, plot_grid).mu_hat;
        }

        std::vector<std::tuple<std::string, std::string, double>> rows;
        if (binary) {
            rows.emplace_back(method.name, "eps_ate", ate_err);
            rows.emplace_back(method.name, "eps_pehe", pehe);
        } else {
            std::vector<double> hat(hat_at_eval.begin(),
                                    hat_at_eval.begin() + static_cast<long>(xs.size()));
            rows.emplace_back(method.name, "rmse", rmse(mu_true, hat));
            rows.emplace_back(method.name, "mape", mape_masked(mu_true, hat).value);

            // the slope metric re-requests exactly the points evaluated above,
            // so a table lookup stands in for the fitted curve
            std::unordered_map<double, double> table;
            table.reserve(eval_points.size());
            for (std::size_t k = 0; k < eval_points.size(); ++k)
                table[eval_points[k]] = hat_at_eval[k];
            const auto hat_fn = [&table](double x) {
                const auto it = table.find(x);
                if (it == table.end())
                    throw ContractError("slope metric asked for an unevaluated point");
                return it->second;
            };
            rows.emplace_back(method.name, "mtef_bias",
                              mtef_bias(oracle, hat_fn, xs, kMtefDx));
        }

        if (method.name == "CausalEGM") full_model_rows = rows;
        for (auto& row : rows) result.rows.push_back(std::move(row));
        if (!curve.empty()) result.curves.emplace_back(method.name, std::move(curve));
    }
    return result;
}

int cmd_benchmark(const CLI::App& cmd, const CliOptions& opt) {
    RunConfig cfg = load_config(cmd, opt);
    if (cfg.seeds.empty()) throw ConfigError("benchmark needs at least one seed");

    Dataset csv_data;
    OracleCurve csv_oracle;
    const bool from_csv = !cfg.data_csv.empty();
    bool binary = false;
    if (from_csv) {
        if (cfg.oracle_csv.empty())
            throw ConfigError("benchmarking on data_csv needs oracle_csv with the truth curve");
        csv_data = read_dataset_csv(cfg.data_csv);
        csv_oracle = read_oracle_csv(cfg.oracle_csv);
        cfg.p = csv_data.p();
        cfg.model.p = csv_data.p();
        binary = cfg.model.treatment == TreatmentKind::binary;
    } else {
        check_treatment_matches(cfg);
        binary = cfg.dataset == DataKind::constant_binary;
    }
    const std::vector<MethodSpec> methods = build_methods(cfg, binary);
    if (methods.empty()) throw ConfigError("benchmark has every method disabled");
    const std::vector<double> plot_grid =
        (!opt.grid_spec.empty() && !binary) ? parse_grid(opt.grid_spec) : std::vector<double>{};
    const std::string dataset_label =
        from_csv ? fs::path(cfg.data_csv).stem().string() : to_string(cfg.dataset);
    ensure_dir(cfg.out_dir);

    std::string seed_list;
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k)
        seed_list += (k ? "," : "") + std::to_string(cfg.seeds[k]);
    const std::vector<std::string> comments = {
        "config " + config_hash(cfg),
        "seeds " + seed_list,
        "dataset " + dataset_label,
    };

    // per-seed rows are appended the moment a seed finishes, so a cancelled
    // run still leaves its completed replicates on disk
    const std::string per_seed_path = join_path(cfg.out_dir, "per_seed.csv");
    {
        std::ofstream out(per_seed_path);
        if (!out) throw IoError("cannot open '" + per_seed_path + "' for writing");
        for (const auto& comment : comments) out << "# " << comment << "\n";
        out << "seed,dataset,method,metric,value\n";
    }

    std::vector<SeedResult> results(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::exception_ptr failure;

    auto flush_seed = [&](std::size_t k) {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::ofstream out(per_seed_path, std::ios::app);
        for (const auto& [method, metric, value] : results[k].rows)
            out << cfg.seeds[k] << ',' << csv_quote(dataset_label) << ','
                << csv_quote(method) << ',' << metric << ',' << format_double(value) << "\n";
        std::fprintf(stderr, "seed %llu done (%zu/%zu)\n",
                     static_cast<unsigned long long>(cfg.seeds[k]), k + 1, cfg.seeds.size());
    };
    auto worker = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= cfg.seeds.size()) break;
            results[k] = run_benchmark_seed(cfg, cfg.seeds[k], methods, plot_grid,
                                            from_csv ? &csv_data : nullptr,
                                            from_csv ? &csv_oracle : nullptr);
            flush_seed(k);
        }
    };

    const int jobs =
        std::clamp<int>(opt.jobs, 1, static_cast<int>(cfg.seeds.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                try {
                    worker();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(io_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(cfg.seeds.size());
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    // aggregate rows mirror the benchmark table layout: one line per
    // method/metric with mean and spread over the seed replicates
    std::vector<std::vector<std::string>> agg_rows;
    const std::vector<std::string> metric_order =
        binary ? std::vector<std::string>{"eps_ate", "eps_pehe"}
               : std::vector<std::string>{"rmse", "mape", "mtef_bias"};
    for (const MethodSpec& method : methods) {
        for (const std::string& metric : metric_order) {
            std::vector<double> per_seed;
            for (const SeedResult& r : results)
                for (const auto& [m_name, m_metric, value] : r.rows)
                    if (m_name == method.name && m_metric == metric)
                        per_seed.push_back(value);
            const MetricReport report = make_report(metric, per_seed);
            agg_rows.push_back({dataset_label, method.name, metric,
                                format_double(report.mean), format_double(report.sd),
                                std::to_string(per_seed.size())});
        }
    }
    const std::string results_path = join_path(cfg.out_dir, "results.csv");
    write_table_csv(results_path, {"dataset", "method", "metric", "mean", "sd", "n_seeds"},
                    agg_rows, comments);

    if (!plot_grid.empty()) {
        std::vector<std::vector<std::string>> curve_rows;
        for (std::size_t k = 0; k < results.size(); ++k)
            for (const auto& [method, curve] : results[k].curves)
                for (std::size_t g = 0; g < plot_grid.size(); ++g)
                    curve_rows.push_back({std::to_string(cfg.seeds[k]), method,
                                          format_double(plot_grid[g]),
                                          format_double(results[k].curve_truth[g]),
                                          format_double(curve[g])});
        write_table_csv(join_path(cfg.out_dir, "curves.csv"),
                        {"seed", "method", "x", "mu_true", "mu_hat"}, curve_rows, comments);

        // replication band: mean with a normal-approximation 95% interval
        // across seeds at each grid point
        std::vector<std::vector<std::string>> band_rows;
        for (const MethodSpec& method : methods) {
            for (std::size_t g = 0; g < plot_grid.size(); ++g) {
                std::vector<double> values;
                for (const SeedResult& r : results)
                    for (const auto& [m_name, curve] : r.curves)
                        if (m_name == method.name) values.push_back(curve[g]);
                if (values.empty()) continue;
                const MetricReport rep = make_report("curve", values);
                band_rows.push_back({method.name, format_double(plot_grid[g]),
                                     format_double(rep.mean),
                                     format_double(rep.mean - 1.96 * rep.sd),
                                     format_double(rep.mean + 1.96 * rep.sd),
                                     std::to_string(values.size())});
            }
        }
        write_table_csv(join_path(cfg.out_dir, "band.csv"),
                        {"method", "x", "mean", "lo95", "hi95", "n_seeds"}, band_rows,
                        comments);
    }

    std::printf("benchmark complete: %zu seeds, %zu methods -> %s\n", cfg.seeds.size(),
                methods.size(), results_path.c_str());
    return 0;
}

// -------------------------------------------------------------- appendix-b

int cmd_appendix_b(const CLI::App& cmd, const CliOptions& opt) {
    RunConfig cfg = load_config(cmd, opt);
    ensure_dir(cfg.out_dir);

    AppendixBOptions ab;
    ab.n_train = cfg.ab_n_train;
    ab.n_holdout = cfg.ab_n_holdout;
    ab.seed = cfg.model.seed;
    ab.iterations = cfg.ab_iterations;
    ab.eval_every = cfg.ab_eval_every;
    ab.batch_size = cfg.ab_batch_size;
    ab.lr = cfg.ab_lr;
    ab.progress = [](int iter, double holdout) {
        std::fprintf(stderr, "iter %d  holdout %.4f\n", iter, holdout);
    };

    const AppendixBResult result = run_appendix_b_experiment(ab);

    // reference constants quoted for comparison: the originally reported
    // theoretical floor (1.907, which the eigenvalue sum here does not
    // reproduce), best held-out error (2.339) and their gap (0.432)
    const std::vector<std::string> comments = {
        "config " + config_hash(cfg),
        "seed " + std::to_string(ab.seed),
        "computed_theoretical " + format_double(result.theoretical),
        "reported_theoretical 1.907",
        "reported_best_holdout 2.339",
        "reported_delta 0.432",
        "best_holdout " + format_double(result.best_holdout),
        "best_iteration " + std::to_string(result.best_iteration),
        "delta " + format_double(result.delta),
    };

    std::vector<std::vector<std::string>> rows;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [iteration, holdout] : result.checkpoints) {
        best = std::min(best, holdout);
        rows.push_back({std::to_string(iteration), format_double(holdout),
                        format_double(best)});
    }
    const std::string path = join_path(cfg.out_dir, "appendix_b.csv");
    write_table_csv(path, {"iteration", "holdout_error", "best_so_far"}, rows, comments);

    std::printf("theoretical %.6f  best holdout %.6f at iter %d  delta %.6f -> %s\n",
                result.theoretical, result.best_holdout, result.best_iteration, result.delta,
                path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CausalEGM: generative modeling for causal effect estimation"};
    app.require_subcommand(1);
    CliOptions opt;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "key = value configuration file");
        cmd->add_option("--seed", opt.seed, "override the seed (and seed list)");
        cmd->add_option("--out", opt.out, "output directory");
    };

    auto add_generator = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", opt.dataset,
                        "hirano | sun | colangelo | twins | constant_binary");
        cmd->add_option("--n", opt.n, "sample count");
        cmd->add_option("--p", opt.p, "covariate count");
        cmd->add_option("--tau", opt.tau, "effect size for constant_binary");
        cmd->add_option("--treatment", opt.treatment,
                        "continuous | binary (resets the latent partition to its defaults)");
    };

    CLI::App* sim = app.add_subcommand("simulate",
                                       "generate a synthetic dataset and its oracle curve");
    add_common(sim);
    add_generator(sim);

    CLI::App* train = app.add_subcommand("train", "train a model and persist it with its trace");
    add_common(train);
    add_generator(train);
    train->add_option("--data", opt.data_path, "train on this CSV instead of simulating");
    train->add_option("--iterations", opt.iterations, "override the iteration count");

    CLI::App* est = app.add_subcommand("estimate", "evaluate a trained model on a dataset");
    est->add_option("--model", opt.model_path, "model file from train")->required();
    est->add_option("--data", opt.data_path, "dataset CSV")->required();
    est->add_option("--grid", opt.grid_spec, "treatment grid lo:hi:count");
    est->add_option("--mode", opt.mode, "adrf | effects (default follows the model)");
    est->add_option("--factual", opt.factual, "observed | predicted factual outcomes");
    est->add_option("--out", opt.out, "output directory");

    CLI::App* bench = app.add_subcommand("benchmark",
                                         "multi-seed simulate/train/estimate comparison");
    add_common(bench);
    add_generator(bench);
    bench->add_option("--jobs", opt.jobs, "concurrent seeds (1 = deterministic ordering)");
    bench->add_option("--iterations", opt.iterations, "override the iteration count");
    bench->add_option("--grid", opt.grid_spec, "also emit per-seed curves on this grid");

    CLI::App* ab = app.add_subcommand("appendix-b",
                                      "dimension-reduction reconstruction experiment");
    add_common(ab);
    ab->add_option("--iterations", opt.iterations, "override the iteration count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) return cmd_simulate(*sim, opt);
        if (train->parsed()) return cmd_train(*train, opt);
        if (est->parsed()) return cmd_estimate(*est, opt);
        if (bench->parsed()) return cmd_benchmark(*bench, opt);
        if (ab->parsed()) return cmd_appendix_b(*ab, opt);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: parse: %s\n", e.what());
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: shape: %s\n", e.what());
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: contract: %s\n", e.what());
    } catch (const TrainError& e) {
        std::fprintf(stderr, "error: train: %s\n", e.what());
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: format: %s\n", e.what());
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
    }
    return 1;
}
