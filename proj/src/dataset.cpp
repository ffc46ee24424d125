#include "ganmrf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ganmrf/rng.hpp"

namespace ganmrf {

DatasetSplit split_dataset(const Dictionary& dict, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(dict.n_atoms());
    if (n == 0) throw DataError("cannot split an empty dictionary");
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

    // Largest-remainder apportionment; ties by part order (train, val, test).
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double raw = double(n) * fractions[i];
        sizes[i] = static_cast<std::size_t>(std::floor(raw));
        remainders[i] = raw - double(sizes[i]);
        assigned += sizes[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; k < n - assigned; ++k) sizes[order[k]] += 1;
    for (int i = 0; i < 3; ++i)
        if (sizes[i] == 0)
            throw ConfigError("split part " + std::to_string(i) + " is empty for " +
                              std::to_string(n) + " atoms");

    Rng rng(seed);
    const std::vector<std::size_t> perm = rng.permutation(n);
    DatasetSplit split;
    split.train_idx.assign(perm.begin(), perm.begin() + sizes[0]);
    split.val_idx.assign(perm.begin() + sizes[0], perm.begin() + sizes[0] + sizes[1]);
    split.test_idx.assign(perm.begin() + sizes[0] + sizes[1], perm.end());
    return split;
}

Dictionary normalize_atoms(const Dictionary& dict) {
    dict.validate();
    Dictionary out = dict;
    for (Eigen::Index j = 0; j < out.atoms.cols(); ++j) {
        const double norm = out.atoms.col(j).norm();
        if (norm == 0.0)
            throw NumericError("zero-norm atom at T1=" + std::to_string(dict.params[j].t1_ms) +
                               " T2=" + std::to_string(dict.params[j].t2_ms));
        out.atoms.col(j) /= norm;
    }
    out.normalized = true;
    return out;
}

Dictionary scale_for_training(const Dictionary& dict, double* scale_out) {
    if (!dict.normalized) throw DataError("scale_for_training expects a normalized dictionary");
    const double max_abs = dict.atoms.cwiseAbs().maxCoeff();
    if (max_abs == 0.0) throw NumericError("cannot scale an all-zero dictionary");
    const double scale = 0.9 / max_abs;
    Dictionary out = dict;
    out.atoms *= scale;
    out.train_scale = scale;
    if (scale_out) *scale_out = scale;
    return out;
}

Dictionary select_atoms(const Dictionary& dict, const std::vector<std::size_t>& idx) {
    dict.validate();
    Dictionary out;
    out.atoms.resize(dict.atoms.rows(), static_cast<Eigen::Index>(idx.size()));
    out.params.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= static_cast<std::size_t>(dict.n_atoms()))
            throw DataError("atom index out of range: " + std::to_string(idx[k]));
        out.atoms.col(static_cast<Eigen::Index>(k)) = dict.atoms.col(static_cast<Eigen::Index>(idx[k]));
        out.params.push_back(dict.params[idx[k]]);
    }
    out.normalized = dict.normalized;
    out.train_scale = dict.train_scale;
    return out;
}

} // namespace ganmrf
