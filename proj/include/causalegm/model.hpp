#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "causalegm/mlp.hpp"
#include "causalegm/rng.hpp"

namespace cegm {

enum class TreatmentKind { continuous, binary };

// dimensions of the four latent blocks: z0 drives both outcome and
// treatment, z1 only the outcome, z2 only the treatment, z3 neither
struct LatentPartition {
    int z0 = 1, z1 = 1, z2 = 1, z3 = 7;

    int total() const { return z0 + z1 + z2 + z3; }
    void validate() const;
    static LatentPartition defaults_for(TreatmentKind kind);
    bool operator==(const LatentPartition&) const = default;
};

struct ModelConfig {
    int p = 0;  // covariate dimension
    TreatmentKind treatment = TreatmentKind::continuous;
    LatentPartition partition = LatentPartition::defaults_for(TreatmentKind::continuous);
    std::vector<int> gen_hidden = {64, 64, 64, 64};   // E, G, F, H hidden widths
    std::vector<int> critic_hidden = {64, 32, 8};     // D_z, D_v hidden widths
    double leaky_slope = 0.2;
    bool use_roundtrip = true;  // adversarial + reconstruction training of the latent map
    bool use_v_gan = true;      // adversarial term on generated covariates
    bool use_z_rec = true;      // latent reconstruction term
    bool bn_critics = true;     // batch norm inside the critics
    double gp_lambda = 10.0;
    double lr = 2e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double bn_momentum = 0.99;
    double bn_eps = 1e-5;
    int batch_size = 32;
    long long iterations = 30000;
    int critic_steps = 1;  // critic updates per generator update
    std::uint64_t seed = 42;

    void validate() const;
    bool has_dz() const { return use_roundtrip; }
    bool has_dv() const { return use_roundtrip && use_v_gan; }
    bool has_g() const { return use_roundtrip; }
    bool operator==(const ModelConfig&) const = default;
};

struct Dataset {
    Mat x;  // n x 1 treatments
    Mat y;  // n x 1 outcomes
    Mat v;  // n x p covariates

    int n() const { return x.rows; }
    int p() const { return v.cols; }
    void validate() const;  // shape agreement and finiteness
};

// per-iteration loss record; terms disabled by flags stay 0
struct TraceRow {
    double gan_e = 0, gan_g = 0, gan_dz = 0, gan_dv = 0;
    double rec_v = 0, rec_z = 0, mse_f = 0, mse_h = 0;
};

struct CausalEGMModel {
    ModelConfig cfg;
    nn::Mlp e_net;   // covariates -> latent
    nn::Mlp g_net;   // latent -> covariates
    nn::Mlp f_net;   // (x, z0, z1) -> outcome
    nn::Mlp h_net;   // (z0, z2) -> treatment
    nn::Mlp dz_net;  // latent critic
    nn::Mlp dv_net;  // covariate critic

    static CausalEGMModel build(const ModelConfig& cfg);

    Mat encode(const Mat& v) const;
    // predicted outcome for each encoded row at the given treatment values
    // (x has one column and as many rows as z)
    Mat predict_outcome(const Mat& x, const Mat& z) const;
    Mat predict_treatment(const Mat& z) const;
};

struct GanLosses {
    double generator_loss = 0;  // -mean critic(fake)
    double critic_loss = 0;     // -mean critic(real) + mean critic(fake) + lambda * penalty
};

// evaluates the adversarial pair objective for one critic on given batches;
// interpolation points for the penalty use one uniform weight per sample
GanLosses gan_pair_losses(const nn::Mlp& critic, const Mat& real, const Mat& fake, double lambda,
                          Rng& rng);

class Trainer {
  public:
    Trainer(CausalEGMModel& model, const Dataset& data);

    // critic_steps critic updates followed by one update of (E, G, F, H),
    // all on the supplied batch; prior holds fresh standard-normal draws
    TraceRow train_step(const Mat& vb, const Mat& xb, const Mat& yb, const Mat& prior);

    // full training loop: iterations steps on uniformly resampled batches
    std::vector<TraceRow> train(
        const std::function<void(long long, const TraceRow&)>& progress = nullptr,
        long long progress_every = 1000);

    Rng& rng() { return rng_; }

  private:
    void critic_update(const Mat& vb, const Mat& prior, TraceRow& row);
    void generator_update(const Mat& vb, const Mat& xb, const Mat& yb, const Mat& prior,
                          TraceRow& row);
    void sample_batch(Mat& vb, Mat& xb, Mat& yb);
    Mat sample_prior(int n);

    CausalEGMModel& m_;
    const Dataset& data_;
    Rng rng_;
    nn::Adam gen_opt_;
    nn::Adam critic_opt_;
};

// convenience: build + train in one call
CausalEGMModel train_model(const ModelConfig& cfg, const Dataset& data,
                           std::vector<TraceRow>* trace_out = nullptr,
                           const std::function<void(long long, const TraceRow&)>& progress = nullptr);

void save_model(const CausalEGMModel& model, const std::string& path);
CausalEGMModel load_model(const std::string& path);

}  // namespace cegm
