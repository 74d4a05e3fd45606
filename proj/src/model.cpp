#include "causalegm/model.hpp"

#include <cmath>
#include <fstream>

#include "causalegm/kernels.hpp"
#include "causalegm/serialize.hpp"

namespace cegm {

using nn::Mlp;
using nn::MlpSpec;
using nn::Mode;
using nn::OutputActivation;

void LatentPartition::validate() const {
    if (z0 < 1 || z1 < 1 || z2 < 1 || z3 < 1)
        throw ConfigError("latent partition: all four block sizes must be positive");
}

LatentPartition LatentPartition::defaults_for(TreatmentKind kind) {
    if (kind == TreatmentKind::binary) return {3, 3, 6, 6};
    return {1, 1, 1, 7};
}

void ModelConfig::validate() const {
    if (p < 1) throw ConfigError("model config: covariate dimension p must be positive");
    partition.validate();
    if (gen_hidden.empty() || critic_hidden.empty())
        throw ConfigError("model config: hidden layer lists must be non-empty");
    for (int w : gen_hidden)
        if (w < 1) throw ConfigError("model config: hidden widths must be positive");
    for (int w : critic_hidden)
        if (w < 1) throw ConfigError("model config: hidden widths must be positive");
    if (!(leaky_slope >= 0.0) || leaky_slope >= 1.0)
        throw ConfigError("model config: leaky_slope must lie in [0, 1)");
    if (batch_size < 2) throw ConfigError("model config: batch_size must be at least 2");
    if (iterations < 0) throw ConfigError("model config: iterations must be non-negative");
    if (critic_steps < 1) throw ConfigError("model config: critic_steps must be at least 1");
    if (!(lr >= 0.0)) throw ConfigError("model config: learning rate must be non-negative");
    if (!(gp_lambda >= 0.0)) throw ConfigError("model config: gp_lambda must be non-negative");
    if (!(bn_momentum >= 0.0) || bn_momentum >= 1.0)
        throw ConfigError("model config: bn_momentum must lie in [0, 1)");
    if (!(bn_eps > 0.0)) throw ConfigError("model config: bn_eps must be positive");
    if (use_z_rec && !use_roundtrip)
        throw ConfigError("model config: use_z_rec requires use_roundtrip");
    if (use_v_gan && !use_roundtrip)
        throw ConfigError("model config: use_v_gan requires use_roundtrip");
}

void Dataset::validate() const {
    if (x.rows < 1) throw ShapeError("dataset: empty");
    if (x.cols != 1 || y.cols != 1) throw ShapeError("dataset: x and y must have one column");
    if (y.rows != x.rows || v.rows != x.rows)
        throw ShapeError("dataset: row count mismatch between x, y and v");
    if (v.cols < 1) throw ShapeError("dataset: covariates must have at least one column");
    for (double a : x.a)
        if (!std::isfinite(a)) throw ParseError("dataset: non-finite treatment value");
    for (double a : y.a)
        if (!std::isfinite(a)) throw ParseError("dataset: non-finite outcome value");
    for (double a : v.a)
        if (!std::isfinite(a)) throw ParseError("dataset: non-finite covariate value");
}

namespace {

MlpSpec make_spec(int in, const std::vector<int>& hidden, int out, double slope,
                  OutputActivation act, bool bn, double bn_eps) {
    MlpSpec s;
    s.layer_sizes.reserve(hidden.size() + 2);
    s.layer_sizes.push_back(in);
    for (int w : hidden) s.layer_sizes.push_back(w);
    s.layer_sizes.push_back(out);
    s.leaky_slope = slope;
    s.output_activation = act;
    s.batch_norm = bn;
    s.bn_eps = bn_eps;
    return s;
}

Mat interpolate_rows(const Mat& real, const Mat& fake, Rng& rng) {
    if (!real.same_shape(fake)) throw ShapeError("interpolate: real/fake shape mismatch");
    Mat out(real.rows, real.cols);
    for (int i = 0; i < real.rows; ++i) {
        const double u = rng.uniform();
        const double* ri = real.row(i);
        const double* fi = fake.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < real.cols; ++j) oi[j] = u * ri[j] + (1.0 - u) * fi[j];
    }
    return out;
}

}  // namespace

CausalEGMModel CausalEGMModel::build(const ModelConfig& cfg) {
    cfg.validate();
    CausalEGMModel m;
    m.cfg = cfg;
    const int q = cfg.partition.total();
    const OutputActivation h_act = cfg.treatment == TreatmentKind::binary
                                       ? OutputActivation::sigmoid
                                       : OutputActivation::linear;
    m.e_net = Mlp::init(make_spec(cfg.p, cfg.gen_hidden, q, cfg.leaky_slope,
                                  OutputActivation::linear, false, cfg.bn_eps),
                        split_seed(cfg.seed, 0));
    if (cfg.has_g())
        m.g_net = Mlp::init(make_spec(q, cfg.gen_hidden, cfg.p, cfg.leaky_slope,
                                      OutputActivation::linear, false, cfg.bn_eps),
                            split_seed(cfg.seed, 1));
    m.f_net = Mlp::init(make_spec(1 + cfg.partition.z0 + cfg.partition.z1, cfg.gen_hidden, 1,
                                  cfg.leaky_slope, OutputActivation::linear, false, cfg.bn_eps),
                        split_seed(cfg.seed, 2));
    m.h_net = Mlp::init(make_spec(cfg.partition.z0 + cfg.partition.z2, cfg.gen_hidden, 1,
                                  cfg.leaky_slope, h_act, false, cfg.bn_eps),
                        split_seed(cfg.seed, 3));
    if (cfg.has_dz())
        m.dz_net = Mlp::init(make_spec(q, cfg.critic_hidden, 1, cfg.leaky_slope,
                                       OutputActivation::linear, cfg.bn_critics, cfg.bn_eps),
                             split_seed(cfg.seed, 4));
    if (cfg.has_dv())
        m.dv_net = Mlp::init(make_spec(cfg.p, cfg.critic_hidden, 1, cfg.leaky_slope,
                                       OutputActivation::linear, cfg.bn_critics, cfg.bn_eps),
                             split_seed(cfg.seed, 5));
    return m;
}

Mat CausalEGMModel::encode(const Mat& v) const { return e_net.forward(v, Mode::eval); }

Mat CausalEGMModel::predict_outcome(const Mat& x, const Mat& z) const {
    if (x.cols != 1 || x.rows != z.rows)
        throw ShapeError("predict_outcome: x must be a column aligned with z");
    const int q0 = cfg.partition.z0, q1 = cfg.partition.z1;
    Mat in(z.rows, 1 + q0 + q1);
    for (int i = 0; i < z.rows; ++i) {
        double* r = in.row(i);
        r[0] = x(i, 0);
        const double* zi = z.row(i);
        for (int j = 0; j < q0 + q1; ++j) r[1 + j] = zi[j];
    }
    return f_net.forward(in, Mode::eval);
}

Mat CausalEGMModel::predict_treatment(const Mat& z) const {
    const int q0 = cfg.partition.z0, q1 = cfg.partition.z1, q2 = cfg.partition.z2;
    Mat in(z.rows, q0 + q2);
    for (int i = 0; i < z.rows; ++i) {
        double* r = in.row(i);
        const double* zi = z.row(i);
        for (int j = 0; j < q0; ++j) r[j] = zi[j];
        for (int j = 0; j < q2; ++j) r[q0 + j] = zi[q0 + q1 + j];
    }
    return h_net.forward(in, Mode::eval);
}

GanLosses gan_pair_losses(const Mlp& critic, const Mat& real, const Mat& fake, double lambda,
                          Rng& rng) {
    if (critic.spec.output_dim() != 1)
        throw ContractError("gan_pair_losses: critic output must be scalar");
    const Mat d_real = critic.forward_pre_output(real, Mode::train);
    const Mat d_fake = critic.forward_pre_output(fake, Mode::train);
    const double mean_real = kernels::mean_all(d_real);
    const double mean_fake = kernels::mean_all(d_fake);
    const Mat zhat = interpolate_rows(real, fake, rng);
    const double pen =
        nn::gradient_penalty_value(critic, zhat, critic.snapshot_running_stats());
    GanLosses out;
    out.generator_loss = -mean_fake;
    out.critic_loss = -mean_real + mean_fake + lambda * pen;
    return out;
}

namespace {

std::vector<std::pair<Mat*, Mat*>> generator_params(CausalEGMModel& m) {
    std::vector<std::pair<Mat*, Mat*>> out;
    for (Mlp* net : {&m.e_net, &m.g_net, &m.f_net, &m.h_net}) {
        if (net->layers.empty()) continue;
        auto pg = net->param_grad_pairs();
        out.insert(out.end(), pg.begin(), pg.end());
    }
    return out;
}

std::vector<std::pair<Mat*, Mat*>> critic_params(CausalEGMModel& m) {
    std::vector<std::pair<Mat*, Mat*>> out;
    for (Mlp* net : {&m.dz_net, &m.dv_net}) {
        if (net->layers.empty()) continue;
        auto pg = net->param_grad_pairs();
        out.insert(out.end(), pg.begin(), pg.end());
    }
    return out;
}

nn::AdamConfig adam_config(const ModelConfig& cfg) {
    nn::AdamConfig a;
    a.lr = cfg.lr;
    a.beta1 = cfg.adam_beta1;
    a.beta2 = cfg.adam_beta2;
    a.eps = cfg.adam_eps;
    return a;
}

}  // namespace

Trainer::Trainer(CausalEGMModel& model, const Dataset& data)
    : m_(model),
      data_(data),
      rng_(split_seed(model.cfg.seed, 1000)),
      gen_opt_(adam_config(model.cfg), generator_params(model)),
      critic_opt_(adam_config(model.cfg), critic_params(model)) {
    data.validate();
    if (data.p() != model.cfg.p)
        throw ShapeError("trainer: dataset covariate dimension " + std::to_string(data.p()) +
                         " does not match model config p=" + std::to_string(model.cfg.p));
    if (model.cfg.treatment == TreatmentKind::binary)
        for (double xv : data.x.a)
            if (xv != 0.0 && xv != 1.0)
                throw ParseError("trainer: binary treatment values must be 0 or 1");
}

void Trainer::sample_batch(Mat& vb, Mat& xb, Mat& yb) {
    const int nb = m_.cfg.batch_size;
    for (int i = 0; i < nb; ++i) {
        const int idx = static_cast<int>(rng_.below(static_cast<std::uint64_t>(data_.n())));
        const double* vr = data_.v.row(idx);
        double* vo = vb.row(i);
        for (int j = 0; j < data_.p(); ++j) vo[j] = vr[j];
        xb(i, 0) = data_.x(idx, 0);
        yb(i, 0) = data_.y(idx, 0);
    }
}

Mat Trainer::sample_prior(int n) {
    Mat z(n, m_.cfg.partition.total());
    for (double& v : z.a) v = rng_.normal();
    return z;
}

void Trainer::critic_update(const Mat& vb, const Mat& prior, TraceRow& row) {
    if (!m_.cfg.has_dz()) return;
    const double mom = m_.cfg.bn_momentum;
    const Mat z_fake = m_.e_net.forward(vb, Mode::eval);
    const nn::BnSnapshot dz_stats = m_.dz_net.snapshot_running_stats();
    Mat v_fake;
    nn::BnSnapshot dv_stats;
    if (m_.cfg.has_dv()) {
        v_fake = m_.g_net.forward(prior, Mode::eval);
        dv_stats = m_.dv_net.snapshot_running_stats();
    }
    m_.dz_net.zero_grads();
    if (m_.cfg.has_dv()) m_.dv_net.zero_grads();

    ad::Tape t;
    auto dz = nn::tie(t, m_.dz_net, true);
    auto* d_real = nn::build_forward(t, dz, t.constant_ref(prior), Mode::train, true, mom, false);
    auto* d_fake = nn::build_forward(t, dz, t.constant_ref(z_fake), Mode::train, true, mom, false);
    const Mat zhat = interpolate_rows(prior, z_fake, rng_);
    auto* pen_z = nn::gradient_penalty(t, dz, zhat, dz_stats);
    auto* l_dz = t.add_scalars({t.scale(t.mean_all(d_real), -1.0), t.mean_all(d_fake),
                                t.scale(pen_z, m_.cfg.gp_lambda)});
    ad::Node* total = l_dz;
    ad::Node* l_dv = nullptr;
    if (m_.cfg.has_dv()) {
        auto dv = nn::tie(t, m_.dv_net, true);
        auto* dv_real =
            nn::build_forward(t, dv, t.constant_ref(vb), Mode::train, true, mom, false);
        auto* dv_fake =
            nn::build_forward(t, dv, t.constant_ref(v_fake), Mode::train, true, mom, false);
        const Mat vhat = interpolate_rows(vb, v_fake, rng_);
        auto* pen_v = nn::gradient_penalty(t, dv, vhat, dv_stats);
        l_dv = t.add_scalars({t.scale(t.mean_all(dv_real), -1.0), t.mean_all(dv_fake),
                              t.scale(pen_v, m_.cfg.gp_lambda)});
        total = t.add_scalars({l_dz, l_dv});
    }
    t.backward(total);
    critic_opt_.step();
    row.gan_dz = l_dz->v()(0, 0);
    row.gan_dv = l_dv ? l_dv->v()(0, 0) : 0.0;
}

void Trainer::generator_update(const Mat& vb, const Mat& xb, const Mat& yb, const Mat& prior,
                               TraceRow& row) {
    const ModelConfig& cfg = m_.cfg;
    const double mom = cfg.bn_momentum;
    m_.e_net.zero_grads();
    m_.f_net.zero_grads();
    m_.h_net.zero_grads();
    if (cfg.has_g()) m_.g_net.zero_grads();

    ad::Tape t;
    auto e = nn::tie(t, m_.e_net, true);
    auto f = nn::tie(t, m_.f_net, true);
    auto h = nn::tie(t, m_.h_net, true);
    auto* vb_node = t.constant_ref(vb);
    auto* z_enc = nn::build_forward(t, e, vb_node, Mode::train, false, mom);

    std::vector<ad::Node*> terms;
    if (cfg.use_roundtrip) {
        auto g = nn::tie(t, m_.g_net, true);
        auto dz = nn::tie(t, m_.dz_net, false);
        auto* dz_on_enc = nn::build_forward(t, dz, z_enc, Mode::train, false, mom, false);
        auto* l_gan_e = t.scale(t.mean_all(dz_on_enc), -1.0);
        terms.push_back(l_gan_e);
        row.gan_e = l_gan_e->v()(0, 0);

        auto* prior_node = t.constant_ref(prior);
        ad::Node* v_fake = nullptr;
        if (cfg.use_v_gan || cfg.use_z_rec)
            v_fake = nn::build_forward(t, g, prior_node, Mode::train, false, mom);
        if (cfg.use_v_gan) {
            auto dv = nn::tie(t, m_.dv_net, false);
            auto* dv_on_fake = nn::build_forward(t, dv, v_fake, Mode::train, false, mom, false);
            auto* l_gan_g = t.scale(t.mean_all(dv_on_fake), -1.0);
            terms.push_back(l_gan_g);
            row.gan_g = l_gan_g->v()(0, 0);
        }
        auto* v_rec = nn::build_forward(t, g, z_enc, Mode::train, false, mom);
        auto* l_rec_v = t.mean_row_sumsq(t.sub(vb_node, v_rec));
        terms.push_back(l_rec_v);
        row.rec_v = l_rec_v->v()(0, 0);
        if (cfg.use_z_rec) {
            auto* z_rec = nn::build_forward(t, e, v_fake, Mode::train, false, mom);
            auto* l_rec_z = t.mean_row_sumsq(t.sub(prior_node, z_rec));
            terms.push_back(l_rec_z);
            row.rec_z = l_rec_z->v()(0, 0);
        }
    }

    const int q0 = cfg.partition.z0, q1 = cfg.partition.z1, q2 = cfg.partition.z2;
    auto* z0 = t.slice_cols(z_enc, 0, q0);
    auto* z1 = t.slice_cols(z_enc, q0, q0 + q1);
    auto* z2 = t.slice_cols(z_enc, q0 + q1, q0 + q1 + q2);
    auto* xb_node = t.constant_ref(xb);
    auto* y_hat = nn::build_forward(t, f, t.concat_cols({xb_node, z0, z1}), Mode::train, false, mom);
    auto* l_f = t.mean_row_sumsq(t.sub(t.constant_ref(yb), y_hat));
    terms.push_back(l_f);
    row.mse_f = l_f->v()(0, 0);
    auto* x_hat = nn::build_forward(t, h, t.concat_cols({z0, z2}), Mode::train, false, mom);
    auto* l_h = t.mean_row_sumsq(t.sub(xb_node, x_hat));
    terms.push_back(l_h);
    row.mse_h = l_h->v()(0, 0);

    t.backward(t.add_scalars(terms));
    gen_opt_.step();
}

TraceRow Trainer::train_step(const Mat& vb, const Mat& xb, const Mat& yb, const Mat& prior) {
    TraceRow row;
    for (int s = 0; s < m_.cfg.critic_steps; ++s) critic_update(vb, prior, row);
    generator_update(vb, xb, yb, prior, row);
    return row;
}

std::vector<TraceRow> Trainer::train(const std::function<void(long long, const TraceRow&)>& progress,
                                     long long progress_every) {
    const ModelConfig& cfg = m_.cfg;
    std::vector<TraceRow> trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations));
    Mat vb(cfg.batch_size, cfg.p), xb(cfg.batch_size, 1), yb(cfg.batch_size, 1);
    for (long long iter = 0; iter < cfg.iterations; ++iter) {
        sample_batch(vb, xb, yb);
        const Mat prior = sample_prior(cfg.batch_size);
        const TraceRow row = train_step(vb, xb, yb, prior);
        for (double v : {row.gan_e, row.gan_g, row.gan_dz, row.gan_dv, row.rec_v, row.rec_z,
                         row.mse_f, row.mse_h})
            if (!std::isfinite(v))
                throw TrainError("non-finite loss at iteration " + std::to_string(iter));
        trace.push_back(row);
        if (progress && progress_every > 0 && (iter + 1) % progress_every == 0)
            progress(iter + 1, row);
    }
    return trace;
}

CausalEGMModel train_model(const ModelConfig& cfg, const Dataset& data,
                           std::vector<TraceRow>* trace_out,
                           const std::function<void(long long, const TraceRow&)>& progress) {
    CausalEGMModel model = CausalEGMModel::build(cfg);
    Trainer trainer(model, data);
    std::vector<TraceRow> trace = trainer.train(progress);
    if (trace_out) *trace_out = std::move(trace);
    return model;
}

// === persistence ===
//
// layout: magic, format version, model header (treatment, latent partition,
// flags, hyperparameters), then per-network blocks in a fixed order. Each
// block stores the layer sizes, activation enum and flags followed by the
// parameters as little-endian doubles: weights row-major, bias, then
// batch-norm scale/shift/running stats per layer.

namespace {

constexpr char kMagic[8] = {'C', 'E', 'G', 'M', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void write_net(std::ostream& os, const Mlp& net) {
    io::write_u32(os, static_cast<std::uint32_t>(net.spec.layer_sizes.size()));
    for (int s : net.spec.layer_sizes) io::write_u32(os, static_cast<std::uint32_t>(s));
    io::write_u8(os, net.spec.output_activation == OutputActivation::sigmoid ? 1 : 0);
    io::write_u8(os, net.spec.batch_norm ? 1 : 0);
    io::write_f64(os, net.spec.leaky_slope);
    io::write_f64(os, net.spec.bn_eps);
    for (const auto& layer : net.layers) {
        io::write_mat(os, layer.W);
        io::write_mat(os, layer.b);
        if (layer.has_bn()) {
            io::write_mat(os, layer.gamma);
            io::write_mat(os, layer.beta);
            io::write_mat(os, layer.run_mean);
            io::write_mat(os, layer.run_var);
        }
    }
}

Mlp read_net(std::istream& is) {
    MlpSpec spec;
    const std::uint32_t n_sizes = io::read_u32(is);
    if (n_sizes < 2 || n_sizes > 1000) throw FormatError("model file: invalid layer count");
    spec.layer_sizes.resize(n_sizes);
    for (auto& s : spec.layer_sizes) {
        const std::uint32_t v = io::read_u32(is);
        if (v < 1 || v > (1u << 24)) throw FormatError("model file: invalid layer size");
        s = static_cast<int>(v);
    }
    spec.output_activation =
        io::read_u8(is) == 1 ? OutputActivation::sigmoid : OutputActivation::linear;
    spec.batch_norm = io::read_u8(is) == 1;
    spec.leaky_slope = io::read_f64(is);
    spec.bn_eps = io::read_f64(is);
    Mlp net = Mlp::init(spec, 0);
    for (auto& layer : net.layers) {
        io::read_mat(is, layer.W);
        io::read_mat(is, layer.b);
        if (layer.has_bn()) {
            io::read_mat(is, layer.gamma);
            io::read_mat(is, layer.beta);
            io::read_mat(is, layer.run_mean);
            io::read_mat(is, layer.run_var);
        }
    }
    return net;
}

}  // namespace

void save_model(const CausalEGMModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    io::write_u32(os, kFormatVersion);
    const ModelConfig& cfg = model.cfg;
    io::write_u8(os, cfg.treatment == TreatmentKind::binary ? 1 : 0);
    io::write_u32(os, static_cast<std::uint32_t>(cfg.p));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.partition.z0));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.partition.z1));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.partition.z2));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.partition.z3));
    io::write_u8(os, cfg.use_roundtrip ? 1 : 0);
    io::write_u8(os, cfg.use_v_gan ? 1 : 0);
    io::write_u8(os, cfg.use_z_rec ? 1 : 0);
    io::write_u8(os, cfg.bn_critics ? 1 : 0);
    io::write_f64(os, cfg.leaky_slope);
    io::write_f64(os, cfg.gp_lambda);
    io::write_f64(os, cfg.lr);
    io::write_f64(os, cfg.adam_beta1);
    io::write_f64(os, cfg.adam_beta2);
    io::write_f64(os, cfg.adam_eps);
    io::write_f64(os, cfg.bn_momentum);
    io::write_f64(os, cfg.bn_eps);
    io::write_u32(os, static_cast<std::uint32_t>(cfg.batch_size));
    io::write_u64(os, static_cast<std::uint64_t>(cfg.iterations));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.critic_steps));
    io::write_u64(os, cfg.seed);
    io::write_u32(os, static_cast<std::uint32_t>(cfg.gen_hidden.size()));
    for (int w : cfg.gen_hidden) io::write_u32(os, static_cast<std::uint32_t>(w));
    io::write_u32(os, static_cast<std::uint32_t>(cfg.critic_hidden.size()));
    for (int w : cfg.critic_hidden) io::write_u32(os, static_cast<std::uint32_t>(w));

    const Mlp* nets[6] = {&model.e_net, &model.g_net, &model.f_net,
                          &model.h_net, &model.dz_net, &model.dv_net};
    for (const Mlp* net : nets) io::write_u8(os, net->layers.empty() ? 0 : 1);
    for (const Mlp* net : nets)
        if (!net->layers.empty()) write_net(os, *net);
    if (!os) throw IoError("write failure on " + path);
}

CausalEGMModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a model file: bad magic in " + path);
    const std::uint32_t version = io::read_u32(is);
    if (version != kFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version));
    CausalEGMModel m;
    ModelConfig& cfg = m.cfg;
    cfg.treatment = io::read_u8(is) == 1 ? TreatmentKind::binary : TreatmentKind::continuous;
    cfg.p = static_cast<int>(io::read_u32(is));
    cfg.partition.z0 = static_cast<int>(io::read_u32(is));
    cfg.partition.z1 = static_cast<int>(io::read_u32(is));
    cfg.partition.z2 = static_cast<int>(io::read_u32(is));
    cfg.partition.z3 = static_cast<int>(io::read_u32(is));
    cfg.use_roundtrip = io::read_u8(is) == 1;
    cfg.use_v_gan = io::read_u8(is) == 1;
    cfg.use_z_rec = io::read_u8(is) == 1;
    cfg.bn_critics = io::read_u8(is) == 1;
    cfg.leaky_slope = io::read_f64(is);
    cfg.gp_lambda = io::read_f64(is);
    cfg.lr = io::read_f64(is);
    cfg.adam_beta1 = io::read_f64(is);
    cfg.adam_beta2 = io::read_f64(is);
    cfg.adam_eps = io::read_f64(is);
    cfg.bn_momentum = io::read_f64(is);
    cfg.bn_eps = io::read_f64(is);
    cfg.batch_size = static_cast<int>(io::read_u32(is));
    cfg.iterations = static_cast<long long>(io::read_u64(is));
    cfg.critic_steps = static_cast<int>(io::read_u32(is));
    cfg.seed = io::read_u64(is);
    cfg.gen_hidden.resize(io::read_u32(is));
    for (auto& w : cfg.gen_hidden) w = static_cast<int>(io::read_u32(is));
    cfg.critic_hidden.resize(io::read_u32(is));
    for (auto& w : cfg.critic_hidden) w = static_cast<int>(io::read_u32(is));
    cfg.validate();

    Mlp* nets[6] = {&m.e_net, &m.g_net, &m.f_net, &m.h_net, &m.dz_net, &m.dv_net};
    bool present[6];
    for (bool& b : present) b = io::read_u8(is) == 1;
    for (int i = 0; i < 6; ++i)
        if (present[i]) *nets[i] = read_net(is);

    // cross-check stored networks against the header
    const int q = cfg.partition.total();
    if (m.e_net.spec.input_dim() != cfg.p || m.e_net.spec.output_dim() != q)
        throw FormatError("model file: encoder shape disagrees with header");
    if (present[1] != cfg.has_g() || present[4] != cfg.has_dz() || present[5] != cfg.has_dv())
        throw FormatError("model file: network presence disagrees with flags");
    if (m.f_net.spec.output_dim() != 1 ||
        m.f_net.spec.input_dim() != 1 + cfg.partition.z0 + cfg.partition.z1)
        throw FormatError("model file: outcome network shape disagrees with header");
    if (m.h_net.spec.input_dim() != cfg.partition.z0 + cfg.partition.z2)
        throw FormatError("model file: treatment network shape disagrees with header");
    return m;
}

}  // namespace cegm
