#include "ganmrf/nn.hpp"

#include <cmath>
#include <fstream>

#include "ganmrf/rng.hpp"

namespace ganmrf::nn {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "linear") return Activation::Linear;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation: " + name);
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += std::size_t(l.weights.size()) + std::size_t(l.bias.size());
    return n;
}

void Mlp::validate() const {
    if (layers.empty()) throw DataError("MLP has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (layers[k].bias.size() != layers[k].weights.rows())
            throw DataError("bias/weight row mismatch at layer " + std::to_string(k));
        if (k > 0 && layers[k].weights.cols() != layers[k - 1].weights.rows())
            throw DataError("layer dims do not chain at layer " + std::to_string(k));
    }
}

namespace {

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Sigmoid:
            return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

// Derivative of the activation expressed through the pre-activation.
Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
        case Activation::Relu:
            return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::Sigmoid:
            return z.unaryExpr([](double v) {
                const double s = 1.0 / (1.0 + std::exp(-v));
                return s * (1.0 - s);
            });
        case Activation::Tanh:
            return z.unaryExpr([](double v) {
                const double t = std::tanh(v);
                return 1.0 - t * t;
            });
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

void check_cache(const Mlp& mlp, const ForwardCache& cache, const Eigen::MatrixXd& grad_output) {
    if (cache.pre.size() != mlp.layers.size())
        throw DataError("forward cache does not match this network (layer count)");
    if (cache.input.rows() != mlp.in_dim())
        throw DataError("forward cache does not match this network (input dim)");
    for (std::size_t k = 0; k < mlp.layers.size(); ++k)
        if (cache.pre[k].rows() != mlp.layers[k].weights.rows() ||
            cache.pre[k].cols() != cache.input.cols())
            throw DataError("forward cache does not match this network at layer " +
                            std::to_string(k));
    if (grad_output.rows() != mlp.out_dim() || grad_output.cols() != cache.input.cols())
        throw DataError("output gradient shape does not match the cached forward pass");
}

Eigen::MatrixXd backprop(const Mlp& mlp, const ForwardCache& cache, Eigen::MatrixXd delta,
                         MlpGrads& grads) {
    grads.weights.resize(mlp.layers.size());
    grads.bias.resize(mlp.layers.size());
    for (std::size_t k = mlp.layers.size(); k-- > 0;) {
        const Eigen::MatrixXd prev = k == 0 ? cache.input
                                            : apply_activation(mlp.hidden_activation, cache.pre[k - 1]);
        grads.weights[k] = delta * prev.transpose();
        grads.bias[k] = delta.rowwise().sum();
        if (k == 0) return mlp.layers[0].weights.transpose() * delta;
        delta = (mlp.layers[k].weights.transpose() * delta)
                    .cwiseProduct(activation_derivative(mlp.hidden_activation, cache.pre[k - 1]));
    }
    return {};
}

} // namespace

Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& x, ForwardCache* cache) {
    mlp.validate();
    if (x.rows() != mlp.in_dim())
        throw DataError("input has " + std::to_string(x.rows()) + " rows but layer 0 expects " +
                        std::to_string(mlp.in_dim()));
    if (cache) {
        cache->input = x;
        cache->pre.clear();
        cache->pre.reserve(mlp.layers.size());
    }
    Eigen::MatrixXd a = x;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        Eigen::MatrixXd z = (mlp.layers[k].weights * a).colwise() + mlp.layers[k].bias;
        if (cache) cache->pre.push_back(z);
        const Activation act =
            k + 1 == mlp.layers.size() ? mlp.output_activation : mlp.hidden_activation;
        a = apply_activation(act, z);
    }
    return a;
}

MlpGrads MlpGrads::zeros_like(const Mlp& mlp) {
    MlpGrads g;
    for (const auto& l : mlp.layers) {
        g.weights.emplace_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        g.bias.emplace_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
}

bool MlpGrads::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : bias)
        if (!b.allFinite()) return false;
    return true;
}

Eigen::MatrixXd backward(const Mlp& mlp, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_output, MlpGrads& grads) {
    check_cache(mlp, cache, grad_output);
    const Eigen::MatrixXd delta =
        grad_output.cwiseProduct(activation_derivative(mlp.output_activation, cache.pre.back()));
    return backprop(mlp, cache, delta, grads);
}

Eigen::MatrixXd backward_from_head_preactivation(const Mlp& mlp, const ForwardCache& cache,
                                                 const Eigen::MatrixXd& grad_head_pre,
                                                 MlpGrads& grads) {
    check_cache(mlp, cache, grad_head_pre);
    return backprop(mlp, cache, grad_head_pre, grads);
}

AdamState AdamState::zeros_like(const Mlp& mlp) {
    AdamState s;
    for (const auto& l : mlp.layers) {
        s.m_w.emplace_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.v_w.emplace_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.m_b.emplace_back(Eigen::VectorXd::Zero(l.bias.size()));
        s.v_b.emplace_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return s;
}

void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (grads.weights.size() != mlp.layers.size() || state.m_w.size() != mlp.layers.size())
        throw DataError("Adam state/gradient layout does not match the network");
    if (!grads.all_finite()) throw NumericError("non-finite gradient in Adam step");

    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.t));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        param -= lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + state.epsilon).matrix());
    };
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        update(mlp.layers[k].weights, state.m_w[k], state.v_w[k], grads.weights[k]);
        update(mlp.layers[k].bias, state.m_b[k], state.v_b[k], grads.bias[k]);
    }
}

Mlp init_mlp(const std::vector<Eigen::Index>& dims, Activation head, std::uint64_t seed) {
    if (dims.size() < 2) throw ConfigError("init_mlp needs at least input and output dims");
    Rng rng(seed);
    Mlp mlp;
    mlp.output_activation = head;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weights.resize(dims[k + 1], dims[k]);
        const double scale = std::sqrt(2.0 / double(dims[k]));
        // Row-major fill order so the draw sequence is part of the format.
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(r, c) = scale * rng.normal();
        layer.bias = Eigen::VectorXd::Zero(dims[k + 1]);
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

} // namespace ganmrf::nn
