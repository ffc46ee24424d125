#include <bit>
#include <cstring>
#include <fstream>

#include "ganmrf/nn.hpp"

namespace ganmrf::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'M', 'R', 'F'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

// Weights go to disk row-major regardless of Eigen's storage order.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), std::streamsize(std::size_t(rm.size()) * 8));
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()), std::streamsize(std::size_t(rm.size()) * 8));
    if (!in) throw DataError("checkpoint truncated while reading a weight matrix");
    m = rm;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(std::size_t(v.size()) * 8));
}

void read_vector(std::istream& in, Eigen::VectorXd& v, Eigen::Index n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(std::size_t(v.size()) * 8));
    if (!in) throw DataError("checkpoint truncated while reading a bias vector");
}

} // namespace

void write_checkpoint_header(std::ostream& out, std::uint32_t version) {
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, version);
}

std::uint32_t read_checkpoint_header(std::istream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    return read_pod<std::uint32_t>(in, "version");
}

void write_mlp_block(std::ostream& out, const Mlp& mlp, const AdamState& state) {
    mlp.validate();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.hidden_activation));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.output_activation));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.layers.size()));
    for (const auto& l : mlp.layers) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.weights.cols()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.weights.rows()));
        write_matrix(out, l.weights);
        write_vector(out, l.bias);
    }
    write_pod<std::uint64_t>(out, state.t);
    write_pod<double>(out, state.beta1);
    write_pod<double>(out, state.beta2);
    write_pod<double>(out, state.epsilon);
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        write_matrix(out, state.m_w[k]);
        write_vector(out, state.m_b[k]);
    }
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        write_matrix(out, state.v_w[k]);
        write_vector(out, state.v_b[k]);
    }
}

void read_mlp_block(std::istream& in, Mlp& mlp, AdamState& state) {
    mlp.layers.clear();
    mlp.hidden_activation = static_cast<Activation>(read_pod<std::uint32_t>(in, "hidden activation"));
    mlp.output_activation = static_cast<Activation>(read_pod<std::uint32_t>(in, "output activation"));
    const auto n_layers = read_pod<std::uint32_t>(in, "layer count");
    if (n_layers == 0) throw DataError("checkpoint network has no layers");
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const auto in_dim = read_pod<std::uint32_t>(in, "layer in_dim");
        const auto out_dim = read_pod<std::uint32_t>(in, "layer out_dim");
        DenseLayer l;
        read_matrix(in, l.weights, out_dim, in_dim);
        read_vector(in, l.bias, out_dim);
        mlp.layers.push_back(std::move(l));
    }
    mlp.validate();
    state = AdamState::zeros_like(mlp);
    state.t = read_pod<std::uint64_t>(in, "Adam step count");
    state.beta1 = read_pod<double>(in, "Adam beta1");
    state.beta2 = read_pod<double>(in, "Adam beta2");
    state.epsilon = read_pod<double>(in, "Adam epsilon");
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        read_matrix(in, state.m_w[k], mlp.layers[k].weights.rows(), mlp.layers[k].weights.cols());
        read_vector(in, state.m_b[k], mlp.layers[k].bias.size());
    }
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        read_matrix(in, state.v_w[k], mlp.layers[k].weights.rows(), mlp.layers[k].weights.cols());
        read_vector(in, state.v_b[k], mlp.layers[k].bias.size());
    }
}

void save_mlp_checkpoint(const std::string& path, const Mlp& mlp, const AdamState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    write_checkpoint_header(out, 1);
    write_mlp_block(out, mlp, state);
    if (!out) throw DataError("short write to checkpoint: " + path);
}

void load_mlp_checkpoint(const std::string& path, Mlp& mlp, AdamState& state) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    const std::uint32_t version = read_checkpoint_header(in, path);
    if (version != 1)
        throw DataError("checkpoint " + path + " is version " + std::to_string(version) +
                        ", expected a bare network (version 1)");
    read_mlp_block(in, mlp, state);
}

} // namespace ganmrf::nn
