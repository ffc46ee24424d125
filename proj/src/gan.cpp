#include "ganmrf/gan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ganmrf/dataset.hpp"
#include "ganmrf/parallel.hpp"
#include "ganmrf/rng.hpp"

namespace ganmrf::gan {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double map_to_unit(double v, double lo, double hi) {
    if (hi == lo) return 0.0;
    return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

} // namespace

ConditionMap ConditionMap::fit(const std::vector<TissueParams>& training_params,
                               const SequenceParams& seq, std::size_t descriptor_bins) {
    if (training_params.empty()) throw DataError("cannot fit a condition map to an empty grid");
    ConditionMap m;
    m.descriptor_bins = descriptor_bins;
    m.log_t1_lo = m.log_t2_lo = std::numeric_limits<double>::infinity();
    m.log_t1_hi = m.log_t2_hi = -std::numeric_limits<double>::infinity();
    for (const auto& t : training_params) {
        t.validate();
        m.log_t1_lo = std::min(m.log_t1_lo, std::log10(t.t1_ms));
        m.log_t1_hi = std::max(m.log_t1_hi, std::log10(t.t1_ms));
        m.log_t2_lo = std::min(m.log_t2_lo, std::log10(t.t2_ms));
        m.log_t2_hi = std::max(m.log_t2_hi, std::log10(t.t2_ms));
    }
    if (descriptor_bins > 0) {
        auto bin_range = [&](const std::vector<double>& series, double& lo, double& hi) {
            lo = std::numeric_limits<double>::infinity();
            hi = -std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < descriptor_bins; ++b) {
                const std::size_t begin = series.size() * b / descriptor_bins;
                const std::size_t end = series.size() * (b + 1) / descriptor_bins;
                double acc = 0.0;
                for (std::size_t i = begin; i < end; ++i) acc += series[i];
                const double mean = end > begin ? acc / double(end - begin) : 0.0;
                lo = std::min(lo, mean);
                hi = std::max(hi, mean);
            }
        };
        bin_range(seq.flip_angles_deg, m.fa_lo, m.fa_hi);
        bin_range(seq.tr_ms, m.tr_lo, m.tr_hi);
    }
    return m;
}

Eigen::VectorXd ConditionMap::tissue_condition(const TissueParams& t) const {
    Eigen::VectorXd y(2);
    y(0) = map_to_unit(std::log10(t.t1_ms), log_t1_lo, log_t1_hi);
    y(1) = map_to_unit(std::log10(t.t2_ms), log_t2_lo, log_t2_hi);
    return y;
}

Eigen::VectorXd ConditionMap::sequence_descriptor(const SequenceParams& seq) const {
    Eigen::VectorXd d(2 * descriptor_bins);
    if (descriptor_bins == 0) return d;
    auto fill = [&](const std::vector<double>& series, double lo, double hi, Eigen::Index offset) {
        for (std::size_t b = 0; b < descriptor_bins; ++b) {
            const std::size_t begin = series.size() * b / descriptor_bins;
            const std::size_t end = series.size() * (b + 1) / descriptor_bins;
            double acc = 0.0;
            for (std::size_t i = begin; i < end; ++i) acc += series[i];
            const double mean = end > begin ? acc / double(end - begin) : 0.0;
            d(offset + Eigen::Index(b)) = map_to_unit(mean, lo, hi);
        }
    };
    fill(seq.flip_angles_deg, fa_lo, fa_hi, 0);
    fill(seq.tr_ms, tr_lo, tr_hi, Eigen::Index(descriptor_bins));
    return d;
}

Eigen::VectorXd ConditionMap::condition(const TissueParams& t,
                                        const Eigen::VectorXd& descriptor) const {
    Eigen::VectorXd y{Eigen::VectorXd::Zero(Eigen::Index(y_dim()))};
    y.head(2) = tissue_condition(t);
    if (descriptor_bins > 0) {
        if (descriptor.size() != Eigen::Index(2 * descriptor_bins))
            throw DataError("sequence descriptor length does not match the condition map");
        y.tail(descriptor.size()) = descriptor;
    }
    return y;
}

Eigen::MatrixXd ConditionMap::conditions(const std::vector<TissueParams>& params,
                                         const SequenceParams& seq) const {
    const Eigen::VectorXd desc = sequence_descriptor(seq);
    Eigen::MatrixXd y(Eigen::Index(y_dim()), Eigen::Index(params.size()));
    for (std::size_t j = 0; j < params.size(); ++j)
        y.col(Eigen::Index(j)) = condition(params[j], desc);
    return y;
}

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (z_dim < 1) throw ConfigError("z_dim must be at least 1");
    if (d_steps_per_g_step < 1) throw ConfigError("d_steps_per_g_step must be at least 1");
}

namespace {

Eigen::MatrixXd sigmoid_probs(const nn::Mlp& d, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& y, nn::ForwardCache* cache = nullptr) {
    Eigen::MatrixXd input(x.rows() + y.rows(), x.cols());
    input.topRows(x.rows()) = x;
    input.bottomRows(y.rows()) = y;
    return nn::forward(d, input, cache);
}

double mean_log(const Eigen::MatrixXd& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) acc += std::log(clamp_prob(p(i)));
    return acc / double(p.size());
}

} // namespace

double d_loss(const GanModel& model, const Eigen::MatrixXd& real_x, const Eigen::MatrixXd& real_y,
              const Eigen::MatrixXd& fake_x, const Eigen::MatrixXd& fake_y) {
    if (real_x.cols() == 0 || fake_x.cols() == 0) throw DataError("d_loss needs non-empty batches");
    const Eigen::MatrixXd pr = sigmoid_probs(model.discriminator, real_x, real_y);
    const Eigen::MatrixXd pf = sigmoid_probs(model.discriminator, fake_x, fake_y);
    double acc_f = 0.0;
    for (Eigen::Index i = 0; i < pf.size(); ++i) acc_f += std::log(1.0 - clamp_prob(pf(i)));
    const double loss = -mean_log(pr) - acc_f / double(pf.size());
    if (!std::isfinite(loss)) throw NumericError("non-finite discriminator loss");
    return loss;
}

double g_loss(const GanModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
              const Eigen::MatrixXd& paired_real, double lambda) {
    if (z.cols() == 0) throw DataError("g_loss needs a non-empty batch");
    if (z.cols() != y.cols() || z.cols() != paired_real.cols())
        throw DataError("g_loss batch lengths are not aligned");
    Eigen::MatrixXd gin(z.rows() + y.rows(), z.cols());
    gin.topRows(z.rows()) = z;
    gin.bottomRows(y.rows()) = y;
    const Eigen::MatrixXd fake = nn::forward(model.generator, gin);
    const Eigen::MatrixXd pf = sigmoid_probs(model.discriminator, fake, y);
    const double l1 = (paired_real - fake).cwiseAbs().colwise().sum().mean();
    const double loss = -mean_log(pf) + lambda * l1;
    if (!std::isfinite(loss)) throw NumericError("non-finite generator loss");
    return loss;
}

double d_loss_gradients(const GanModel& model, const Eigen::MatrixXd& real_x,
                        const Eigen::MatrixXd& real_y, const Eigen::MatrixXd& fake_x,
                        const Eigen::MatrixXd& fake_y, nn::MlpGrads& grads) {
    const auto bsz = double(real_x.cols());
    nn::ForwardCache cache_r, cache_f;
    const Eigen::MatrixXd pr = sigmoid_probs(model.discriminator, real_x, real_y, &cache_r);
    const Eigen::MatrixXd pf = sigmoid_probs(model.discriminator, fake_x, fake_y, &cache_f);

    double acc = 0.0;
    for (Eigen::Index i = 0; i < pr.size(); ++i) acc -= std::log(clamp_prob(pr(i)));
    for (Eigen::Index i = 0; i < pf.size(); ++i) acc -= std::log(1.0 - clamp_prob(pf(i)));
    const double loss = acc / bsz;
    if (!std::isfinite(loss)) throw NumericError("non-finite discriminator loss");

    // dL/d(logit): -(1-p)/B on real, +p/B on fake; the clamped p keeps the
    // form bounded even when the sigmoid saturates in double precision.
    Eigen::MatrixXd delta_r(1, pr.cols()), delta_f(1, pf.cols());
    for (Eigen::Index i = 0; i < pr.cols(); ++i)
        delta_r(0, i) = -(1.0 - clamp_prob(pr(0, i))) / bsz;
    for (Eigen::Index i = 0; i < pf.cols(); ++i) delta_f(0, i) = clamp_prob(pf(0, i)) / bsz;

    nn::MlpGrads grads_f;
    nn::backward_from_head_preactivation(model.discriminator, cache_r, delta_r, grads);
    nn::backward_from_head_preactivation(model.discriminator, cache_f, delta_f, grads_f);
    for (std::size_t k = 0; k < grads.weights.size(); ++k) {
        grads.weights[k] += grads_f.weights[k];
        grads.bias[k] += grads_f.bias[k];
    }
    return loss;
}

double g_loss_gradients(const GanModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                        const Eigen::MatrixXd& paired_real, double lambda, nn::MlpGrads& grads) {
    const auto bsz = double(z.cols());
    Eigen::MatrixXd gin(z.rows() + y.rows(), z.cols());
    gin.topRows(z.rows()) = z;
    gin.bottomRows(y.rows()) = y;

    nn::ForwardCache cache_g, cache_d;
    const Eigen::MatrixXd fake = nn::forward(model.generator, gin, &cache_g);
    const Eigen::MatrixXd pf = sigmoid_probs(model.discriminator, fake, y, &cache_d);

    double acc = 0.0;
    for (Eigen::Index i = 0; i < pf.size(); ++i) acc -= std::log(clamp_prob(pf(i)));
    const double l1 = (paired_real - fake).cwiseAbs().colwise().sum().mean();
    const double loss = acc / bsz + lambda * l1;
    if (!std::isfinite(loss)) throw NumericError("non-finite generator loss");

    Eigen::MatrixXd delta_d(1, pf.cols());
    for (Eigen::Index i = 0; i < pf.cols(); ++i)
        delta_d(0, i) = -(1.0 - clamp_prob(pf(0, i))) / bsz;
    nn::MlpGrads disc_grads;  // only the input gradient is needed here
    const Eigen::MatrixXd d_input_grad =
        nn::backward_from_head_preactivation(model.discriminator, cache_d, delta_d, disc_grads);

    Eigen::MatrixXd d_fake = d_input_grad.topRows(fake.rows());
    d_fake += (lambda / bsz) * (fake - paired_real).unaryExpr([](double v) {
        return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    });
    nn::backward(model.generator, cache_g, d_fake, grads);
    return loss;
}

namespace {

// Without-replacement minibatch stream: a seeded permutation of the training
// columns, consumed in slices, reshuffled each epoch. The trailing slice of an
// epoch may be short.
class BatchStream {
public:
    BatchStream(std::size_t n, std::size_t batch, Rng& rng) : n_(n), batch_(batch), rng_(rng) {
        order_ = rng_.permutation(n_);
    }

    std::vector<std::size_t> next() {
        if (pos_ >= n_) {
            order_ = rng_.permutation(n_);
            pos_ = 0;
        }
        const std::size_t end = std::min(n_, pos_ + batch_);
        std::vector<std::size_t> out(order_.begin() + long(pos_), order_.begin() + long(end));
        pos_ = end;
        return out;
    }

private:
    std::size_t n_;
    std::size_t batch_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

struct Batch {
    Eigen::MatrixXd x;  // fingerprints in training scale
    Eigen::MatrixXd y;  // conditions
};

Batch gather(const Eigen::MatrixXd& atoms, const Eigen::MatrixXd& conds,
             const std::vector<std::size_t>& idx) {
    Batch b;
    b.x.resize(atoms.rows(), Eigen::Index(idx.size()));
    b.y.resize(conds.rows(), Eigen::Index(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        b.x.col(Eigen::Index(k)) = atoms.col(Eigen::Index(idx[k]));
        b.y.col(Eigen::Index(k)) = conds.col(Eigen::Index(idx[k]));
    }
    return b;
}

Eigen::MatrixXd draw_z(std::size_t z_dim, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd z(Eigen::Index(z_dim), cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < Eigen::Index(z_dim); ++r) z(r, c) = rng.normal();
    return z;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
    Eigen::MatrixXd m(top.rows() + bottom.rows(), top.cols());
    m.topRows(top.rows()) = top;
    m.bottomRows(bottom.rows()) = bottom;
    return m;
}

// Synthesize z=0 fingerprints for every column of bench (normalized benchmark)
// and return the relative Frobenius error in percent.
double eval_rmse(const nn::Mlp& gen, const Eigen::MatrixXd& conds, const Eigen::MatrixXd& bench,
                 std::size_t z_dim) {
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(Eigen::Index(z_dim), conds.cols());
    Eigen::MatrixXd out = nn::forward(gen, stack(z, conds));
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double norm = out.col(j).norm();
        if (norm > 0.0) out.col(j) /= norm;
    }
    return 100.0 * (out - bench).norm() / bench.norm();
}

} // namespace

TrainResult train(const Dictionary& train_scaled, const SequenceParams& seq,
                  const Dictionary& eval_set, const TrainConfig& config,
                  const std::function<void(const HistoryRow&)>& on_eval) {
    config.validate();
    train_scaled.validate();
    if (!train_scaled.train_scale)
        throw DataError("training set must be scaled via scale_for_training first");
    if (eval_set.n_atoms() > 0 && !eval_set.normalized)
        throw DataError("evaluation set must be normalized");
    if (eval_set.n_atoms() > 0 && eval_set.n_frames() != train_scaled.n_frames())
        throw DataError("evaluation set frame count differs from the training set");

    const Eigen::Index n_frames = train_scaled.n_frames();
    const std::size_t n_train = std::size_t(train_scaled.n_atoms());

    TrainResult result;
    GanModel& model = result.model;
    model.z_dim = config.z_dim;
    model.train_scale = *train_scaled.train_scale;
    model.cond = ConditionMap::fit(train_scaled.params, seq, config.descriptor_bins);

    Rng master(config.seed);
    const std::uint64_t seed_g = master.next_u64();
    const std::uint64_t seed_d = master.next_u64();
    const std::uint64_t seed_batches = master.next_u64();
    const std::uint64_t seed_z = master.next_u64();

    const auto y_dim = Eigen::Index(model.y_dim());
    model.generator = nn::init_mlp({Eigen::Index(config.z_dim) + y_dim, 128, 128, 128, n_frames},
                                   nn::Activation::Tanh, seed_g);
    model.discriminator =
        nn::init_mlp({n_frames + y_dim, 128, 128, 128, 1}, nn::Activation::Sigmoid, seed_d);
    model.gen_opt = nn::AdamState::zeros_like(model.generator);
    model.disc_opt = nn::AdamState::zeros_like(model.discriminator);

    const Eigen::MatrixXd train_conds = model.cond.conditions(train_scaled.params, seq);
    // The normalized benchmark for the training set is the scaled set divided
    // by its own scale.
    const Eigen::MatrixXd train_bench = train_scaled.atoms / model.train_scale;
    Eigen::MatrixXd eval_conds;
    if (eval_set.n_atoms() > 0) eval_conds = model.cond.conditions(eval_set.params, seq);

    Rng batch_rng(seed_batches);
    Rng z_rng(seed_z);
    BatchStream batches(n_train, config.batch_size, batch_rng);
    const std::size_t eval_interval =
        config.eval_interval > 0 ? config.eval_interval : std::max<std::size_t>(1, config.iterations / 100);

    double last_d_loss = 0.0, last_g_loss = 0.0;
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        try {
            // -- discriminator updates (objective negated into minimization) --
            for (std::size_t ds = 0; ds < config.d_steps_per_g_step; ++ds) {
                const Batch b = gather(train_scaled.atoms, train_conds, batches.next());
                const Eigen::MatrixXd z = draw_z(config.z_dim, b.x.cols(), z_rng);
                const Eigen::MatrixXd fake = nn::forward(model.generator, stack(z, b.y));
                nn::MlpGrads grads;
                last_d_loss = d_loss_gradients(model, b.x, b.y, fake, b.y, grads);
                nn::adam_step(model.discriminator, grads, model.disc_opt, config.lr);
            }

            // -- generator update (non-saturating adversarial term + L1) --
            {
                const Batch b = gather(train_scaled.atoms, train_conds, batches.next());
                const Eigen::MatrixXd z = draw_z(config.z_dim, b.x.cols(), z_rng);
                nn::MlpGrads grads;
                last_g_loss = g_loss_gradients(model, z, b.y, b.x, config.lambda, grads);
                nn::adam_step(model.generator, grads, model.gen_opt, config.lr);
            }
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at generator step " + std::to_string(it) +
                               " (d_loss=" + std::to_string(last_d_loss) +
                               ", g_loss=" + std::to_string(last_g_loss) + ")");
        }

        if (it % eval_interval == 0 || it == config.iterations) {
            HistoryRow row;
            row.iteration = it;
            row.d_loss = last_d_loss;
            row.g_loss = last_g_loss;
            row.train_rmse = eval_rmse(model.generator, train_conds, train_bench, config.z_dim);
            row.test_rmse = eval_set.n_atoms() > 0
                                ? eval_rmse(model.generator, eval_conds, eval_set.atoms, config.z_dim)
                                : 0.0;
            result.history.push_back(row);
            if (on_eval) on_eval(row);
        }
    }
    return result;
}

LambdaTable validate_lambda(const Dictionary& train_scaled, const SequenceParams& seq,
                            const Dictionary& val_set, const std::vector<double>& lambda_grid,
                            const TrainConfig& config) {
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    LambdaTable table;
    for (double lambda : lambda_grid) {
        TrainConfig cfg = config;
        cfg.lambda = lambda;
        TrainResult run;
        try {
            run = train(train_scaled, seq, val_set, cfg);
        } catch (const NumericError& e) {
            throw NumericError("training failed for lambda=" + std::to_string(lambda) + ": " +
                               e.what());
        }
        LambdaRow row;
        row.lambda = lambda;
        row.train_rmse = run.history.empty() ? 0.0 : run.history.back().train_rmse;
        row.val_rmse = run.history.empty() ? 0.0 : run.history.back().test_rmse;
        table.rows.push_back(row);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        const bool better = table.rows[i].val_rmse < table.rows[best].val_rmse;
        const bool tie_bigger = table.rows[i].val_rmse == table.rows[best].val_rmse &&
                                table.rows[i].lambda > table.rows[best].lambda;
        if (better || tie_bigger) best = i;
    }
    table.rows[best].selected = true;
    table.selected_lambda = table.rows[best].lambda;
    return table;
}

Dictionary synthesize(const GanModel& model, const std::vector<TissueParams>& params,
                      const SequenceParams& seq, const ZPolicy& z_policy, unsigned n_threads,
                      double* elapsed_seconds) {
    if (params.empty()) throw DataError("cannot synthesize an empty parameter list");
    if (model.generator.in_dim() != Eigen::Index(model.z_dim + model.y_dim()))
        throw DataError("checkpoint y_dim/z_dim do not match the generator input size");

    const Eigen::VectorXd desc = model.cond.sequence_descriptor(seq);
    const auto t0 = std::chrono::steady_clock::now();

    Eigen::MatrixXd y(Eigen::Index(model.y_dim()), Eigen::Index(params.size()));
    for (std::size_t j = 0; j < params.size(); ++j)
        y.col(Eigen::Index(j)) = model.cond.condition(params[j], desc);

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(Eigen::Index(model.z_dim), Eigen::Index(params.size()));
    if (z_policy.kind == ZPolicy::Kind::SeededRandom) {
        Rng rng(z_policy.seed);
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = rng.normal();
    }

    Dictionary dict;
    dict.params = params;
    dict.atoms.resize(model.n_frames(), Eigen::Index(params.size()));

    // Fixed-size column chunks fan out across threads; the chunk boundaries do
    // not depend on the thread count, so the output is reproducible.
    constexpr std::size_t kChunk = 1024;
    const std::size_t n_chunks = (params.size() + kChunk - 1) / kChunk;
    parallel_for(n_chunks, n_threads, [&](std::size_t c) {
        const auto lo = Eigen::Index(c * kChunk);
        const auto len = Eigen::Index(std::min(kChunk, params.size() - c * kChunk));
        Eigen::MatrixXd gin(z.rows() + y.rows(), len);
        gin.topRows(z.rows()) = z.middleCols(lo, len);
        gin.bottomRows(y.rows()) = y.middleCols(lo, len);
        Eigen::MatrixXd out = nn::forward(model.generator, gin);
        out /= model.train_scale;
        for (Eigen::Index j = 0; j < len; ++j) {
            const double norm = out.col(j).norm();
            if (norm > 0.0) out.col(j) /= norm;
        }
        dict.atoms.middleCols(lo, len) = out;
    });
    dict.normalized = true;

    const auto t1 = std::chrono::steady_clock::now();
    if (elapsed_seconds) *elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
    return dict;
}

double synthesis_rel_rmse(const GanModel& model, const Dictionary& bench,
                          const SequenceParams& seq) {
    if (!bench.normalized) throw DataError("benchmark dictionary must be normalized");
    const Dictionary synth = synthesize(model, bench.params, seq);
    return 100.0 * (synth.atoms - bench.atoms).norm() / bench.atoms.norm();
}

std::vector<std::array<double, 3>> learning_curves(const std::vector<HistoryRow>& history) {
    if (history.empty()) throw DataError("training history is empty");
    std::vector<std::array<double, 3>> rows;
    rows.reserve(history.size());
    for (const auto& h : history)
        rows.push_back({double(h.iteration), h.train_rmse, h.test_rmse});
    return rows;
}

} // namespace ganmrf::gan
