#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ganmrf/nn.hpp"
#include "ganmrf/types.hpp"

namespace ganmrf::gan {

// Builds the conditioning vector y: log10(T1) and log10(T2), each affinely
// mapped to [-1,1] over the training grid's range, optionally followed by a
// sequence descriptor (flip angles and TRs averaged into descriptor_bins bins
// each, mapped to [-1,1] over the training sequence's bin ranges). The mapping
// is fixed at training time and travels with the checkpoint.
struct ConditionMap {
    double log_t1_lo = 0.0, log_t1_hi = 0.0;
    double log_t2_lo = 0.0, log_t2_hi = 0.0;
    std::size_t descriptor_bins = 16;  // 0 = tissue-only conditions
    double fa_lo = 0.0, fa_hi = 0.0;
    double tr_lo = 0.0, tr_hi = 0.0;

    static ConditionMap fit(const std::vector<TissueParams>& training_params,
                            const SequenceParams& seq, std::size_t descriptor_bins);

    std::size_t y_dim() const { return 2 + 2 * descriptor_bins; }

    Eigen::VectorXd tissue_condition(const TissueParams& t) const;
    Eigen::VectorXd sequence_descriptor(const SequenceParams& seq) const;
    // Full y for one atom: tissue condition plus (when enabled) the descriptor.
    Eigen::VectorXd condition(const TissueParams& t, const Eigen::VectorXd& descriptor) const;
    // y matrix (y_dim x n_atoms) for a parameter list under one sequence.
    Eigen::MatrixXd conditions(const std::vector<TissueParams>& params,
                               const SequenceParams& seq) const;
};

// Generator maps (z, y) -> fingerprint in the tanh range; discriminator maps
// (fingerprint, y) -> probability of the fingerprint being simulator output.
struct GanModel {
    nn::Mlp generator;
    nn::Mlp discriminator;
    nn::AdamState gen_opt;
    nn::AdamState disc_opt;
    std::size_t z_dim = 4;
    ConditionMap cond;
    double train_scale = 1.0;

    Eigen::Index n_frames() const { return generator.out_dim(); }
    std::size_t y_dim() const { return cond.y_dim(); }
};

struct TrainConfig {
    double lambda = 100.0;
    double lr = 3e-4;
    std::size_t batch_size = 30;
    std::size_t iterations = 20000;
    std::size_t z_dim = 4;
    std::uint64_t seed = 1234;
    std::size_t d_steps_per_g_step = 1;
    std::size_t descriptor_bins = 16;
    std::size_t eval_interval = 0;  // 0: max(1, iterations/100)

    void validate() const;
};

// Discriminator loss: -mean log D(x|y) - mean log(1 - D(G(z|y)|y)), with
// probabilities clamped to [1e-12, 1-1e-12] before the logarithms. fake_x is
// generator output (or any candidate batch) in training scale.
double d_loss(const GanModel& model, const Eigen::MatrixXd& real_x, const Eigen::MatrixXd& real_y,
              const Eigen::MatrixXd& fake_x, const Eigen::MatrixXd& fake_y);

// Generator loss: -mean log D(G(z|y)|y) + lambda * mean ||x - G(z|y)||_1, the
// L1 norm summed over frames and the means taken over the batch.
double g_loss(const GanModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
              const Eigen::MatrixXd& paired_real, double lambda);

// Same objectives with exact gradients w.r.t. the discriminator (resp.
// generator) parameters; the alternating training steps and the gradient
// validation tests share these paths.
double d_loss_gradients(const GanModel& model, const Eigen::MatrixXd& real_x,
                        const Eigen::MatrixXd& real_y, const Eigen::MatrixXd& fake_x,
                        const Eigen::MatrixXd& fake_y, nn::MlpGrads& grads);
double g_loss_gradients(const GanModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                        const Eigen::MatrixXd& paired_real, double lambda, nn::MlpGrads& grads);

struct HistoryRow {
    std::size_t iteration = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double train_rmse = 0.0;  // relative RMSE in percent vs the benchmark
    double test_rmse = 0.0;
};

struct TrainResult {
    GanModel model;
    std::vector<HistoryRow> history;
};

// Alternating training: d_steps_per_g_step discriminator Adam updates, then
// one generator update, minibatches drawn without replacement per epoch and z
// redrawn from N(0,1) at every use. Every eval_interval generator steps the
// relative RMSE between synthesized (z = 0) and benchmark fingerprints is
// recorded for the training set and for eval_set. Bit-reproducible per seed.
TrainResult train(const Dictionary& train_scaled, const SequenceParams& seq,
                  const Dictionary& eval_set, const TrainConfig& config,
                  const std::function<void(const HistoryRow&)>& on_eval = nullptr);

struct LambdaRow {
    double lambda = 0.0;
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    bool selected = false;
};

struct LambdaTable {
    std::vector<LambdaRow> rows;
    double selected_lambda = 0.0;
};

// One model per lambda under identical seeds and budgets; the lambda with the
// smallest validation RMSE wins, ties going to the larger lambda.
LambdaTable validate_lambda(const Dictionary& train_scaled, const SequenceParams& seq,
                            const Dictionary& val_set, const std::vector<double>& lambda_grid,
                            const TrainConfig& config);

struct ZPolicy {
    enum class Kind { Zeros, SeededRandom } kind = Kind::Zeros;
    std::uint64_t seed = 0;
};

// One generator pass per atom: y from (T1,T2) plus the descriptor of seq, z per
// policy; outputs are divided by train_scale and unit-normalized per column.
Dictionary synthesize(const GanModel& model, const std::vector<TissueParams>& params,
                      const SequenceParams& seq, const ZPolicy& z_policy = {},
                      unsigned n_threads = 0, double* elapsed_seconds = nullptr);

// Relative RMSE (percent) between the z=0 synthesis for bench's params and
// bench itself; bench must be normalized.
double synthesis_rel_rmse(const GanModel& model, const Dictionary& bench,
                          const SequenceParams& seq);

// (iteration, train_rmse, test_rmse) rows extracted from a training history.
std::vector<std::array<double, 3>> learning_curves(const std::vector<HistoryRow>& history);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);
void write_learning_curves_csv(const std::vector<HistoryRow>& history, const std::string& path);
void write_lambda_table_csv(const LambdaTable& table, const std::string& path);

// GAN bundle checkpoint (format version 2): model header (z_dim, y_dim,
// descriptor bins, n_frames, train_scale, condition mapping ranges) followed by
// the generator and discriminator blocks.
void save_checkpoint(const GanModel& model, const std::string& path);
GanModel load_checkpoint(const std::string& path);

} // namespace ganmrf::gan
