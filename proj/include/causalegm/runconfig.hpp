#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalegm/datagen.hpp"
#include "causalegm/estimators.hpp"
#include "causalegm/model.hpp"

namespace cegm {

// Flat key = value experiment configuration. The grammar is one assignment
// per line, `#` starts a comment, no sections or nesting; unknown keys and
// duplicate keys are rejected. Every field has the default shown here and
// serialization writes all of them, so a config round-trips losslessly.
struct RunConfig {
    // data source
    DataKind dataset = DataKind::hirano;
    int n = 10000;
    int p = 50;
    double tau = 2.0;       // effect size for constant_binary
    std::string data_csv;   // when set, training ingests this file instead of simulating
    std::string oracle_csv; // x,mu truth curve for benchmarking on ingested data

    // model; model.p follows the data and model.seed is overridden per replicate
    ModelConfig model;

    // replication and outputs
    std::vector<std::uint64_t> seeds = {42};
    std::string out_dir = ".";
    bool run_causalegm = true;
    bool run_ols = true;
    bool run_reg = true;
    bool run_ablations = false;

    // metric handling
    bool metric_trim = false;  // restrict curve metrics to the [q01, q99] treatment range
    bool pehe_rooted = false;
    FactualSource factual = FactualSource::observed;

    // reconstruction-floor experiment
    int ab_n_train = 50000;
    int ab_n_holdout = 10000;
    int ab_iterations = 40000;
    int ab_eval_every = 500;
    int ab_batch_size = 128;
    double ab_lr = 1e-3;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

// FNV-1a hash of the serialized form, as 16 hex digits; stamped into output
// file comments so artifacts identify their configuration
std::string config_hash(const RunConfig& cfg);

// "lo:hi:count" into count evenly spaced values from lo to hi inclusive;
// count = 1 collapses to {lo}
std::vector<double> parse_grid(const std::string& spec);

}  // namespace cegm
