#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ganmrf/nn.hpp"
#include "ganmrf/rng.hpp"

using namespace ganmrf;
using nn::Activation;

namespace {

nn::Mlp zero_mlp(const std::vector<Eigen::Index>& dims, Activation head) {
    nn::Mlp m = nn::init_mlp(dims, head, 1);
    for (auto& l : m.layers) l.weights.setZero();
    return m;
}

// Scalar loss L = sum(c .* y) so grad_output is just c.
double probe_loss(const nn::Mlp& m, const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
    return (nn::forward(m, x).col(0).cwiseProduct(c)).sum();
}

double max_rel_error_vs_fd(nn::Mlp m, const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
    nn::ForwardCache cache;
    nn::forward(m, x, &cache);
    nn::MlpGrads grads;
    nn::backward(m, cache, c, grads);

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < m.layers.size(); ++k) {
        auto probe = [&](double* p, double analytic) {
            const double keep = *p;
            *p = keep + h;
            const double up = probe_loss(m, x, c);
            *p = keep - h;
            const double dn = probe_loss(m, x, c);
            *p = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double denom = std::max({1e-6, std::abs(fd), std::abs(analytic)});
            worst = std::max(worst, std::abs(fd - analytic) / denom);
        };
        for (Eigen::Index i = 0; i < m.layers[k].weights.size(); ++i)
            probe(m.layers[k].weights.data() + i, grads.weights[k](i));
        for (Eigen::Index i = 0; i < m.layers[k].bias.size(); ++i)
            probe(m.layers[k].bias.data() + i, grads.bias[k](i));
    }
    return worst;
}

} // namespace

TEST_CASE("zeroed network outputs the head's fixed point") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 4);

    const auto sig = nn::forward(zero_mlp({6, 8, 3}, Activation::Sigmoid), x);
    CHECK((sig.array() - 0.5).abs().maxCoeff() == 0.0);

    const auto tanh_out = nn::forward(zero_mlp({6, 8, 3}, Activation::Tanh), x);
    CHECK(tanh_out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches a hand-rolled matrix evaluation on a 2-3-1 net") {
    nn::Mlp m = nn::init_mlp({2, 3, 1}, Activation::Sigmoid, 42);
    const Eigen::Vector2d x(0.7, -1.3);

    // Independent evaluation with explicit loops.
    double h[3];
    for (int i = 0; i < 3; ++i) {
        double z = m.layers[0].bias(i);
        for (int j = 0; j < 2; ++j) z += m.layers[0].weights(i, j) * x(j);
        h[i] = z > 0.0 ? z : 0.0;
    }
    double z2 = m.layers[1].bias(0);
    for (int i = 0; i < 3; ++i) z2 += m.layers[1].weights(0, i) * h[i];
    const double expected = 1.0 / (1.0 + std::exp(-z2));

    const auto y = nn::forward(m, x);
    CHECK(y(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward rejects a wrong input size") {
    nn::Mlp m = nn::init_mlp({4, 3, 2}, Activation::Linear, 1);
    CHECK_THROWS_AS(nn::forward(m, Eigen::VectorXd::Zero(5)), DataError);
}

TEST_CASE("backward on the identity net gives the textbook gradients") {
    nn::Mlp m;
    m.layers.push_back({Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
    m.output_activation = Activation::Linear;

    nn::ForwardCache cache;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 2.5);
    nn::forward(m, x, &cache);
    nn::MlpGrads grads;
    const auto gin = nn::backward(m, cache, Eigen::MatrixXd::Ones(1, 1), grads);
    CHECK(grads.weights[0](0, 0) == 2.5);
    CHECK(grads.bias[0](0) == 1.0);
    CHECK(gin(0, 0) == 1.0);
}

TEST_CASE("relu gates zero out gradients for negative pre-activations") {
    nn::Mlp m;
    m.layers.push_back({Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
    m.layers.push_back({Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
    m.output_activation = Activation::Linear;

    nn::ForwardCache cache;
    nn::forward(m, Eigen::MatrixXd::Constant(1, 1, -3.0), &cache);  // hidden pre-activation -3
    nn::MlpGrads grads;
    const auto gin = nn::backward(m, cache, Eigen::MatrixXd::Ones(1, 1), grads);
    CHECK(grads.weights[0](0, 0) == 0.0);
    CHECK(grads.bias[0](0) == 0.0);
    CHECK(gin(0, 0) == 0.0);
}

TEST_CASE("backward matches central finite differences on a 4-8-8-1 net") {
    Rng rng(7);
    for (Activation head :
         {Activation::Linear, Activation::Sigmoid, Activation::Tanh}) {
        nn::Mlp m = nn::init_mlp({4, 8, 8, 1}, head, 17);
        Eigen::VectorXd x(4), c(1);
        for (int i = 0; i < 4; ++i) x(i) = rng.normal();
        c(0) = 1.0 + rng.uniform();
        CHECK(max_rel_error_vs_fd(m, x, c) <= 1e-5);
    }
}

TEST_CASE("backward rejects a stale or mismatched cache") {
    nn::Mlp a = nn::init_mlp({3, 5, 2}, Activation::Linear, 1);
    nn::Mlp b = nn::init_mlp({3, 6, 2}, Activation::Linear, 1);
    nn::ForwardCache cache;
    nn::forward(a, Eigen::VectorXd::Zero(3), &cache);
    nn::MlpGrads grads;
    CHECK_THROWS_AS(nn::backward(b, cache, Eigen::MatrixXd::Zero(2, 1), grads), DataError);
    CHECK_THROWS_AS(nn::backward(a, cache, Eigen::MatrixXd::Zero(3, 1), grads), DataError);
}

TEST_CASE("adam first step moves by -lr under unit gradient") {
    nn::Mlp m;
    m.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)});
    m.output_activation = Activation::Linear;
    nn::AdamState state = nn::AdamState::zeros_like(m);
    nn::MlpGrads g = nn::MlpGrads::zeros_like(m);
    g.weights[0](0, 0) = 1.0;

    nn::adam_step(m, g, state, 1e-5);
    CHECK(state.t == 1);
    CHECK(m.layers[0].weights(0, 0) == doctest::Approx(-1e-5 / (1.0 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    nn::Mlp m = nn::init_mlp({3, 4, 2}, Activation::Tanh, 3);
    const nn::Mlp before = m;
    nn::AdamState state = nn::AdamState::zeros_like(m);
    nn::adam_step(m, nn::MlpGrads::zeros_like(m), state, 1e-3);
    for (std::size_t k = 0; k < m.layers.size(); ++k) {
        CHECK(m.layers[k].weights == before.layers[k].weights);
        CHECK(m.layers[k].bias == before.layers[k].bias);
    }
}

TEST_CASE("three adam steps match a hand-executed recurrence") {
    nn::Mlp m;
    m.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)});
    m.output_activation = Activation::Linear;
    nn::AdamState state = nn::AdamState::zeros_like(m);
    nn::MlpGrads g = nn::MlpGrads::zeros_like(m);
    g.weights[0](0, 0) = 2.0;

    // Independent scalar trace of the update rule.
    double param = 0.0, mm = 0.0, vv = 0.0;
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 3; ++t) {
        mm = b1 * mm + (1 - b1) * 2.0;
        vv = b2 * vv + (1 - b2) * 4.0;
        const double mhat = mm / (1 - std::pow(b1, t));
        const double vhat = vv / (1 - std::pow(b2, t));
        param -= lr * mhat / (std::sqrt(vhat) + eps);
        nn::adam_step(m, g, state, lr);
    }
    CHECK(m.layers[0].weights(0, 0) == doctest::Approx(param).epsilon(1e-12));
    CHECK(state.t == 3);
}

TEST_CASE("adam aborts on non-finite gradients") {
    nn::Mlp m = nn::init_mlp({2, 2}, Activation::Linear, 1);
    nn::AdamState state = nn::AdamState::zeros_like(m);
    nn::MlpGrads g = nn::MlpGrads::zeros_like(m);
    g.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nn::adam_step(m, g, state, 1e-3), NumericError);
}

TEST_CASE("init_mlp is seeded, shaped, and He-scaled") {
    const std::vector<Eigen::Index> dims{5, 128, 128, 128, 1000};
    const nn::Mlp a = nn::init_mlp(dims, Activation::Tanh, 11);
    const nn::Mlp b = nn::init_mlp(dims, Activation::Tanh, 11);
    REQUIRE(a.layers.size() == 4);
    CHECK(a.layers[0].weights.rows() == 128);
    CHECK(a.layers[1].weights.rows() == 128);
    CHECK(a.layers[2].weights.rows() == 128);
    CHECK(a.layers[3].weights.rows() == 1000);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(a.layers[k].weights == b.layers[k].weights);
        CHECK(a.layers[k].bias.cwiseAbs().maxCoeff() == 0.0);
    }

    // Sample variance of a 128x128 layer within 20% of 2/128.
    const auto& w = a.layers[1].weights;
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / double(w.size() - 1);
    CHECK(var == doctest::Approx(2.0 / 128.0).epsilon(0.2));
}

TEST_CASE("activation heads stay inside their ranges") {
    Rng rng(23);
    Eigen::MatrixXd x(6, 64);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();

    const auto sig = nn::forward(nn::init_mlp({6, 16, 8}, Activation::Sigmoid, 2), x);
    CHECK(sig.minCoeff() > 0.0);
    CHECK(sig.maxCoeff() < 1.0);

    const auto th = nn::forward(nn::init_mlp({6, 16, 8}, Activation::Tanh, 2), x);
    CHECK(th.minCoeff() > -1.0);
    CHECK(th.maxCoeff() < 1.0);
}

TEST_CASE("batched forward equals per-example forward") {
    nn::Mlp m = nn::init_mlp({5, 16, 3}, Activation::Tanh, 9);
    Rng rng(31);
    Eigen::MatrixXd x(5, 7);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    const Eigen::MatrixXd batched = nn::forward(m, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const Eigen::MatrixXd single = nn::forward(m, x.col(c));
        CHECK((batched.col(c) - single.col(0)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("mlp checkpoints round-trip bit-exactly") {
    const auto path = std::filesystem::temp_directory_path() / "ganmrf_mlp.gmrf";
    nn::Mlp m = nn::init_mlp({4, 8, 2}, Activation::Sigmoid, 5);
    nn::AdamState state = nn::AdamState::zeros_like(m);
    // Take a couple of steps so the moments are non-trivial.
    nn::MlpGrads g = nn::MlpGrads::zeros_like(m);
    g.weights[0].setConstant(0.25);
    nn::adam_step(m, g, state, 1e-3);
    nn::adam_step(m, g, state, 1e-3);

    nn::save_mlp_checkpoint(path.string(), m, state);
    nn::Mlp m2;
    nn::AdamState s2;
    nn::load_mlp_checkpoint(path.string(), m2, s2);

    CHECK(m2.output_activation == m.output_activation);
    CHECK(m2.hidden_activation == m.hidden_activation);
    REQUIRE(m2.layers.size() == m.layers.size());
    for (std::size_t k = 0; k < m.layers.size(); ++k) {
        CHECK(m2.layers[k].weights == m.layers[k].weights);
        CHECK(m2.layers[k].bias == m.layers[k].bias);
        CHECK(s2.m_w[k] == state.m_w[k]);
        CHECK(s2.v_w[k] == state.v_w[k]);
    }
    CHECK(s2.t == 2);
    CHECK(s2.beta1 == state.beta1);
    CHECK(s2.epsilon == state.epsilon);
    std::filesystem::remove(path);
}
