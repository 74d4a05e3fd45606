#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "causalegm/ad.hpp"
#include "causalegm/mat.hpp"

namespace cegm::nn {

enum class Mode { train, eval };
enum class OutputActivation { linear, sigmoid };

// Fully-connected network: hidden layers use leaky-relu (optionally with
// batch normalization between the affine map and the activation); the output
// layer is linear or sigmoid. layer_sizes lists [input, hidden..., output].
struct MlpSpec {
    std::vector<int> layer_sizes;
    double leaky_slope = 0.2;
    OutputActivation output_activation = OutputActivation::linear;
    bool batch_norm = false;
    double bn_eps = 1e-5;

    void validate() const;
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
};

struct Layer {
    Mat W, b;
    Mat gamma, beta, run_mean, run_var;  // present only on batch-norm layers
    bool has_bn() const { return !gamma.empty(); }
};

// running batch-norm statistics copied at a fixed point in time
struct BnSnapshot {
    std::vector<Mat> mean, var;  // indexed by hidden layer
};

class Mlp {
  public:
    MlpSpec spec;
    std::vector<Layer> layers;
    std::vector<Layer> grads;  // gradient buffers matching W/b/gamma/beta

    // Glorot-uniform weights, zero biases, unit batch-norm scale
    static Mlp init(const MlpSpec& spec, std::uint64_t seed);

    // Mode::eval normalizes with running statistics; Mode::train uses batch
    // statistics without updating the running buffers (updates happen only
    // through the tape op during training).
    Mat forward(const Mat& x, Mode mode = Mode::eval) const;
    Mat forward_pre_output(const Mat& x, Mode mode = Mode::eval) const;

    // per-row gradient of the scalar pre-sigmoid output with respect to the
    // input, evaluated with running statistics
    Mat input_gradient(const Mat& x) const;

    std::size_t param_count() const;
    void zero_grads();

    // trainable parameters in canonical order (per layer: W, b, gamma, beta)
    std::vector<std::pair<Mat*, Mat*>> param_grad_pairs();
    std::vector<std::pair<const Mat*, const Mat*>> param_grad_pairs() const;

    BnSnapshot snapshot_running_stats() const;
};

// network tied onto a tape; parameter leaves are created once per graph
struct TiedLayer {
    ad::Node* W = nullptr;
    ad::Node* b = nullptr;
    ad::Node* gamma = nullptr;
    ad::Node* beta = nullptr;
};

struct TiedMlp {
    Mlp* net = nullptr;
    std::vector<TiedLayer> layers;
    bool trainable = false;
};

// trainable=false ties the parameters as constants (frozen critic)
TiedMlp tie(ad::Tape& tape, Mlp& net, bool trainable);

// builds the forward graph; in Mode::train batch-norm uses batch statistics
// and updates the running buffers only when update_running is set
ad::Node* build_forward(ad::Tape& tape, const TiedMlp& tied, ad::Node* x, Mode mode,
                        bool update_running, double bn_momentum,
                        bool apply_output_activation = true);

// Mean over the batch of (||grad_x D(x)|| - 1)^2 evaluated at zhat, with the
// critic's batch-norm frozen at the supplied statistics. The backward pass
// differentiates the gradient field itself with respect to the critic
// parameters (second-order terms derived in closed form for the
// leaky-relu / frozen-affine-batch-norm architecture).
ad::Node* gradient_penalty(ad::Tape& tape, TiedMlp& critic, const Mat& zhat,
                           const BnSnapshot& stats);

// penalty value only, no graph
double gradient_penalty_value(const Mlp& critic, const Mat& zhat, const BnSnapshot& stats);

// column-standardizes x with batch statistics (biased variance)
Mat batchnorm_normalize(const Mat& x, double eps);

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over an explicit (parameter, gradient) list; update order is the list
// order, so optimizer state and results are reproducible
class Adam {
  public:
    Adam(AdamConfig cfg, std::vector<std::pair<Mat*, Mat*>> param_grads);
    void step();
    long long steps_taken() const { return t_; }

  private:
    AdamConfig cfg_;
    long long t_ = 0;
    std::vector<std::pair<Mat*, Mat*>> pg_;
    std::vector<Mat> m_, v_;
};

}  // namespace cegm::nn
