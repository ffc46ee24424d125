#include <fstream>

#include "ganmrf/gan.hpp"

namespace ganmrf::gan {

namespace {

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

} // namespace

void save_checkpoint(const GanModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    nn::write_checkpoint_header(out, 2);
    write_pod<std::uint32_t>(out, std::uint32_t(model.z_dim));
    write_pod<std::uint32_t>(out, std::uint32_t(model.y_dim()));
    write_pod<std::uint32_t>(out, std::uint32_t(model.cond.descriptor_bins));
    write_pod<std::uint32_t>(out, std::uint32_t(model.n_frames()));
    write_pod<double>(out, model.train_scale);
    write_pod<double>(out, model.cond.log_t1_lo);
    write_pod<double>(out, model.cond.log_t1_hi);
    write_pod<double>(out, model.cond.log_t2_lo);
    write_pod<double>(out, model.cond.log_t2_hi);
    write_pod<double>(out, model.cond.fa_lo);
    write_pod<double>(out, model.cond.fa_hi);
    write_pod<double>(out, model.cond.tr_lo);
    write_pod<double>(out, model.cond.tr_hi);
    nn::write_mlp_block(out, model.generator, model.gen_opt);
    nn::write_mlp_block(out, model.discriminator, model.disc_opt);
    if (!out) throw DataError("short write to checkpoint: " + path);
}

GanModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    const std::uint32_t version = nn::read_checkpoint_header(in, path);
    if (version != 2)
        throw DataError("checkpoint " + path + " is version " + std::to_string(version) +
                        ", expected a model bundle (version 2)");
    GanModel model;
    model.z_dim = read_pod<std::uint32_t>(in, "z_dim");
    const auto y_dim = read_pod<std::uint32_t>(in, "y_dim");
    model.cond.descriptor_bins = read_pod<std::uint32_t>(in, "descriptor bins");
    const auto n_frames = read_pod<std::uint32_t>(in, "frame count");
    model.train_scale = read_pod<double>(in, "train scale");
    model.cond.log_t1_lo = read_pod<double>(in, "T1 mapping");
    model.cond.log_t1_hi = read_pod<double>(in, "T1 mapping");
    model.cond.log_t2_lo = read_pod<double>(in, "T2 mapping");
    model.cond.log_t2_hi = read_pod<double>(in, "T2 mapping");
    model.cond.fa_lo = read_pod<double>(in, "FA mapping");
    model.cond.fa_hi = read_pod<double>(in, "FA mapping");
    model.cond.tr_lo = read_pod<double>(in, "TR mapping");
    model.cond.tr_hi = read_pod<double>(in, "TR mapping");
    if (model.y_dim() != y_dim)
        throw DataError("checkpoint y_dim is inconsistent with its descriptor bins: " + path);
    nn::read_mlp_block(in, model.generator, model.gen_opt);
    nn::read_mlp_block(in, model.discriminator, model.disc_opt);
    if (model.generator.out_dim() != Eigen::Index(n_frames))
        throw DataError("checkpoint generator frame count mismatch: " + path);
    if (model.generator.in_dim() != Eigen::Index(model.z_dim + model.y_dim()))
        throw DataError("checkpoint generator input does not match z_dim + y_dim: " + path);
    return model;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history CSV: " + path);
    out << "iteration,d_loss,g_loss,train_rmse,test_rmse\n";
    out.precision(12);
    for (const auto& h : history)
        out << h.iteration << "," << h.d_loss << "," << h.g_loss << "," << h.train_rmse << ","
            << h.test_rmse << "\n";
}

void write_learning_curves_csv(const std::vector<HistoryRow>& history, const std::string& path) {
    const auto rows = learning_curves(history);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write learning-curve CSV: " + path);
    out << "iteration,train_rmse,test_rmse\n";
    out.precision(12);
    for (const auto& r : rows) out << std::size_t(r[0]) << "," << r[1] << "," << r[2] << "\n";
}

void write_lambda_table_csv(const LambdaTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write lambda table CSV: " + path);
    out << "lambda,train_rmse,val_rmse,selected\n";
    out.precision(12);
    for (const auto& r : table.rows)
        out << r.lambda << "," << r.train_rmse << "," << r.val_rmse << "," << (r.selected ? 1 : 0)
            << "\n";
}

} // namespace ganmrf::gan
