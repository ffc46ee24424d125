#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ganmrf/errors.hpp"

namespace ganmrf::nn {

enum class Activation : std::uint32_t { Linear = 0, Relu = 1, Sigmoid = 2, Tanh = 3 };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Eigen::MatrixXd weights;  // out_dim x in_dim
    Eigen::VectorXd bias;     // out_dim
};

// Fully connected stack: hidden layers share one activation, the head has its
// own. Evaluation is batched; a single vector is a one-column matrix.
struct Mlp {
    std::vector<DenseLayer> layers;
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Linear;

    Eigen::Index in_dim() const { return layers.front().weights.cols(); }
    Eigen::Index out_dim() const { return layers.back().weights.rows(); }
    std::size_t parameter_count() const;
    void validate() const;
};

struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;  // pre-activations, one per layer
};

// y = head(W_L ... act(W_1 x + b_1) ... + b_L); cache (optional) retains what
// backward needs.
Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;

    static MlpGrads zeros_like(const Mlp& mlp);
    bool all_finite() const;
};

// Exact reverse-mode gradients. grad_output is dL/dy (same shape as the
// forward output); per-example contributions are summed over the batch, so a
// mean-over-batch loss carries its 1/B inside grad_output. Returns dL/dx.
Eigen::MatrixXd backward(const Mlp& mlp, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_output, MlpGrads& grads);

// Same, but grad_head_pre is dL/d(head pre-activation): the caller has already
// folded in the head derivative. Used where the head and the loss combine into
// a numerically safer form (log-sigmoid losses).
Eigen::MatrixXd backward_from_head_preactivation(const Mlp& mlp, const ForwardCache& cache,
                                                 const Eigen::MatrixXd& grad_head_pre,
                                                 MlpGrads& grads);

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros_like(const Mlp& mlp);
};

// Standard Adam with bias correction. Throws NumericError on non-finite
// gradients; training must fail loudly rather than clamp.
void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state, double lr);

// He-initialized stack: weights ~ N(0, 2/in_dim), zero biases, hidden ReLU.
Mlp init_mlp(const std::vector<Eigen::Index>& dims, Activation head, std::uint64_t seed);

// Checkpoint block: hidden/head activation ids, layer count, per-layer dims +
// row-major weights + bias, then Adam (t, beta1, beta2, epsilon, m per layer,
// v per layer). Shared by the bare-MLP checkpoint (version 1) and the GAN
// bundle (version 2).
void write_mlp_block(std::ostream& out, const Mlp& mlp, const AdamState& state);
void read_mlp_block(std::istream& in, Mlp& mlp, AdamState& state);

void save_mlp_checkpoint(const std::string& path, const Mlp& mlp, const AdamState& state);
void load_mlp_checkpoint(const std::string& path, Mlp& mlp, AdamState& state);

// Shared header helpers for the checkpoint family ("GMRF" magic).
void write_checkpoint_header(std::ostream& out, std::uint32_t version);
std::uint32_t read_checkpoint_header(std::istream& in, const std::string& path);

} // namespace ganmrf::nn
