#include "causalegm/runconfig.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "causalegm/csv.hpp"
#include "causalegm/errors.hpp"

namespace cegm {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct KeyValue {
    std::string value;
    int line = 0;
    bool consumed = false;
};

using KeyMap = std::map<std::string, KeyValue>;

KeyMap tokenize(const std::string& text) {
    KeyMap keys;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        if (keys.count(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                              key + "' (first set on line " + std::to_string(keys[key].line) +
                              ")");
        keys[key] = {value, line_no, false};
    }
    return keys;
}

const KeyValue* find(KeyMap& keys, const std::string& key) {
    const auto it = keys.find(key);
    if (it == keys.end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
}

[[noreturn]] void bad_value(const std::string& key, const KeyValue& kv, const std::string& want) {
    throw ConfigError("config line " + std::to_string(kv.line) + ": key '" + key + "' needs " +
                      want + ", got '" + kv.value + "'");
}

long long parse_int(const std::string& key, const KeyValue& kv) {
    const char* begin = kv.value.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0') bad_value(key, kv, "an integer");
    return v;
}

double parse_double(const std::string& key, const KeyValue& kv) {
    const char* begin = kv.value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') bad_value(key, kv, "a number");
    return v;
}

bool parse_bool(const std::string& key, const KeyValue& kv) {
    if (kv.value == "true") return true;
    if (kv.value == "false") return false;
    bad_value(key, kv, "true or false");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const KeyValue& kv, Parse parse_one) {
    std::vector<T> out;
    std::stringstream ss(kv.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        KeyValue cell{trim(item), kv.line, false};
        if (cell.value.empty()) bad_value(key, kv, "a comma-separated list");
        out.push_back(static_cast<T>(parse_one(key, cell)));
    }
    if (out.empty()) bad_value(key, kv, "a non-empty comma-separated list");
    return out;
}

void get_int(KeyMap& keys, const std::string& key, int& field) {
    if (const auto* kv = find(keys, key)) field = static_cast<int>(parse_int(key, *kv));
}
void get_ll(KeyMap& keys, const std::string& key, long long& field) {
    if (const auto* kv = find(keys, key)) field = parse_int(key, *kv);
}
void get_u64(KeyMap& keys, const std::string& key, std::uint64_t& field) {
    if (const auto* kv = find(keys, key)) field = static_cast<std::uint64_t>(parse_int(key, *kv));
}
void get_double(KeyMap& keys, const std::string& key, double& field) {
    if (const auto* kv = find(keys, key)) field = parse_double(key, *kv);
}
void get_bool(KeyMap& keys, const std::string& key, bool& field) {
    if (const auto* kv = find(keys, key)) field = parse_bool(key, *kv);
}
void get_string(KeyMap& keys, const std::string& key, std::string& field) {
    if (const auto* kv = find(keys, key)) field = kv->value;
}

std::string bool_str(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    KeyMap keys = tokenize(text);
    RunConfig cfg;

    if (const auto* kv = find(keys, "dataset")) {
        try {
            cfg.dataset = data_kind_from_string(kv->value);
        } catch (const ConfigError&) {
            bad_value("dataset", *kv, "one of hirano, sun, colangelo, twins, constant_binary");
        }
    }
    get_int(keys, "n", cfg.n);
    get_int(keys, "p", cfg.p);
    get_double(keys, "tau", cfg.tau);
    get_string(keys, "data_csv", cfg.data_csv);
    get_string(keys, "oracle_csv", cfg.oracle_csv);

    if (const auto* kv = find(keys, "treatment")) {
        if (kv->value == "continuous")
            cfg.model.treatment = TreatmentKind::continuous;
        else if (kv->value == "binary")
            cfg.model.treatment = TreatmentKind::binary;
        else
            bad_value("treatment", *kv, "continuous or binary");
    }
    cfg.model.partition = LatentPartition::defaults_for(cfg.model.treatment);
    if (const auto* kv = find(keys, "z_dims")) {
        const auto dims = parse_list<int>("z_dims", *kv, parse_int);
        if (dims.size() != 4) bad_value("z_dims", *kv, "exactly four dimensions");
        cfg.model.partition = {dims[0], dims[1], dims[2], dims[3]};
    }
    if (const auto* kv = find(keys, "gen_hidden"))
        cfg.model.gen_hidden = parse_list<int>("gen_hidden", *kv, parse_int);
    if (const auto* kv = find(keys, "critic_hidden"))
        cfg.model.critic_hidden = parse_list<int>("critic_hidden", *kv, parse_int);
    get_double(keys, "leaky_slope", cfg.model.leaky_slope);
    get_bool(keys, "use_roundtrip", cfg.model.use_roundtrip);
    get_bool(keys, "use_v_gan", cfg.model.use_v_gan);
    get_bool(keys, "use_z_rec", cfg.model.use_z_rec);
    get_bool(keys, "bn_critics", cfg.model.bn_critics);
    get_double(keys, "gp_lambda", cfg.model.gp_lambda);
    get_double(keys, "lr", cfg.model.lr);
    get_double(keys, "adam_beta1", cfg.model.adam_beta1);
    get_double(keys, "adam_beta2", cfg.model.adam_beta2);
    get_double(keys, "adam_eps", cfg.model.adam_eps);
    get_double(keys, "bn_momentum", cfg.model.bn_momentum);
    get_double(keys, "bn_eps", cfg.model.bn_eps);
    get_int(keys, "batch_size", cfg.model.batch_size);
    get_ll(keys, "iterations", cfg.model.iterations);
    get_int(keys, "critic_steps", cfg.model.critic_steps);
    get_u64(keys, "seed", cfg.model.seed);

    if (const auto* kv = find(keys, "seeds"))
        cfg.seeds = parse_list<std::uint64_t>("seeds", *kv, parse_int);
    get_string(keys, "out_dir", cfg.out_dir);
    get_bool(keys, "run_causalegm", cfg.run_causalegm);
    get_bool(keys, "run_ols", cfg.run_ols);
    get_bool(keys, "run_reg", cfg.run_reg);
    get_bool(keys, "run_ablations", cfg.run_ablations);
    get_bool(keys, "metric_trim", cfg.metric_trim);
    get_bool(keys, "pehe_rooted", cfg.pehe_rooted);
    if (const auto* kv = find(keys, "factual")) {
        if (kv->value == "observed")
            cfg.factual = FactualSource::observed;
        else if (kv->value == "predicted")
            cfg.factual = FactualSource::predicted;
        else
            bad_value("factual", *kv, "observed or predicted");
    }

    get_int(keys, "ab_n_train", cfg.ab_n_train);
    get_int(keys, "ab_n_holdout", cfg.ab_n_holdout);
    get_int(keys, "ab_iterations", cfg.ab_iterations);
    get_int(keys, "ab_eval_every", cfg.ab_eval_every);
    get_int(keys, "ab_batch_size", cfg.ab_batch_size);
    get_double(keys, "ab_lr", cfg.ab_lr);

    for (const auto& [key, kv] : keys)
        if (!kv.consumed)
            throw ConfigError("config line " + std::to_string(kv.line) + ": unknown key '" + key +
                              "'");

    cfg.model.p = cfg.p;
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config_text(buffer.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::string out;
    auto emit = [&](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    emit("dataset", to_string(cfg.dataset));
    emit("n", std::to_string(cfg.n));
    emit("p", std::to_string(cfg.p));
    emit("tau", format_double(cfg.tau));
    emit("data_csv", cfg.data_csv);
    emit("oracle_csv", cfg.oracle_csv);
    emit("treatment",
         cfg.model.treatment == TreatmentKind::continuous ? "continuous" : "binary");
    emit("z_dims", join(std::vector<int>{cfg.model.partition.z0, cfg.model.partition.z1,
                                         cfg.model.partition.z2, cfg.model.partition.z3}));
    emit("gen_hidden", join(cfg.model.gen_hidden));
    emit("critic_hidden", join(cfg.model.critic_hidden));
    emit("leaky_slope", format_double(cfg.model.leaky_slope));
    emit("use_roundtrip", bool_str(cfg.model.use_roundtrip));
    emit("use_v_gan", bool_str(cfg.model.use_v_gan));
    emit("use_z_rec", bool_str(cfg.model.use_z_rec));
    emit("bn_critics", bool_str(cfg.model.bn_critics));
    emit("gp_lambda", format_double(cfg.model.gp_lambda));
    emit("lr", format_double(cfg.model.lr));
    emit("adam_beta1", format_double(cfg.model.adam_beta1));
    emit("adam_beta2", format_double(cfg.model.adam_beta2));
    emit("adam_eps", format_double(cfg.model.adam_eps));
    emit("bn_momentum", format_double(cfg.model.bn_momentum));
    emit("bn_eps", format_double(cfg.model.bn_eps));
    emit("batch_size", std::to_string(cfg.model.batch_size));
    emit("iterations", std::to_string(cfg.model.iterations));
    emit("critic_steps", std::to_string(cfg.model.critic_steps));
    emit("seed", std::to_string(cfg.model.seed));
    emit("seeds", join(cfg.seeds));
    emit("out_dir", cfg.out_dir);
    emit("run_causalegm", bool_str(cfg.run_causalegm));
    emit("run_ols", bool_str(cfg.run_ols));
    emit("run_reg", bool_str(cfg.run_reg));
    emit("run_ablations", bool_str(cfg.run_ablations));
    emit("metric_trim", bool_str(cfg.metric_trim));
    emit("pehe_rooted", bool_str(cfg.pehe_rooted));
    emit("factual", cfg.factual == FactualSource::observed ? "observed" : "predicted");
    emit("ab_n_train", std::to_string(cfg.ab_n_train));
    emit("ab_n_holdout", std::to_string(cfg.ab_n_holdout));
    emit("ab_iterations", std::to_string(cfg.ab_iterations));
    emit("ab_eval_every", std::to_string(cfg.ab_eval_every));
    emit("ab_batch_size", std::to_string(cfg.ab_batch_size));
    emit("ab_lr", format_double(cfg.ab_lr));
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    // the hash identifies the experiment, so the output location is excluded:
    // rerunning the same config into another directory yields identical files
    RunConfig keyed = cfg;
    keyed.out_dir.clear();
    const std::string text = serialize_run_config(keyed);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::vector<double> parse_grid(const std::string& spec) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw ParseError("grid spec must be lo:hi:count, got '" + spec + "'");
    auto to_double = [&](const std::string& s) {
        const char* begin = s.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || *end != '\0' || !std::isfinite(v))
            throw ParseError("grid spec has a bad number '" + s + "' in '" + spec + "'");
        return v;
    };
    const double lo = to_double(spec.substr(0, c1));
    const double hi = to_double(spec.substr(c1 + 1, c2 - c1 - 1));
    const std::string count_str = spec.substr(c2 + 1);
    const char* begin = count_str.c_str();
    char* end = nullptr;
    const long long count = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0' || count < 1)
        throw ParseError("grid spec needs a positive point count, got '" + spec + "'");
    if (hi < lo) throw ParseError("grid spec needs hi >= lo, got '" + spec + "'");

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        grid.push_back(lo);
    } else {
        for (long long k = 0; k < count; ++k)
            grid.push_back(lo + (hi - lo) * static_cast<double>(k) / (count - 1));
    }
    return grid;
}

}  // namespace cegm
