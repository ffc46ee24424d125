#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ganmrf/errors.hpp"

namespace ganmrf {

// One (T1, T2) relaxation pair in milliseconds. T2 never exceeds T1.
struct TissueParams {
    double t1_ms = 0.0;
    double t2_ms = 0.0;

    void validate() const {
        if (!(t1_ms > 0.0) || !(t2_ms > 0.0))
            throw DataError("tissue params must be positive: T1=" + std::to_string(t1_ms) +
                            " T2=" + std::to_string(t2_ms));
        if (t2_ms > t1_ms)
            throw DataError("T2 must not exceed T1: T1=" + std::to_string(t1_ms) +
                            " T2=" + std::to_string(t2_ms));
    }
};

inline bool operator==(const TissueParams& a, const TissueParams& b) {
    return a.t1_ms == b.t1_ms && a.t2_ms == b.t2_ms;
}

// Closed interval [start_ms, end_ms] stepped by step_ms; both endpoints included.
struct GridSegment {
    double start_ms = 0.0;
    double end_ms = 0.0;
    double step_ms = 0.0;
};

struct GridSpec {
    std::vector<GridSegment> t1_segments;
    std::vector<GridSegment> t2_segments;
};

// Per-frame acquisition parameters. te_ms is shared by all frames.
struct SequenceParams {
    std::vector<double> flip_angles_deg;
    std::vector<double> tr_ms;
    double te_ms = 2.0;
    bool inversion_enabled = true;
    double ti_ms = 20.64;

    std::size_t n_frames() const { return flip_angles_deg.size(); }

    void validate() const {
        if (flip_angles_deg.empty()) throw DataError("sequence has no frames");
        if (tr_ms.size() != flip_angles_deg.size())
            throw DataError("flip angle and TR arrays differ in length");
        if (!(te_ms > 0.0)) throw DataError("TE must be positive");
        if (ti_ms < 0.0) throw DataError("TI must be non-negative");
        for (std::size_t i = 0; i < flip_angles_deg.size(); ++i) {
            if (flip_angles_deg[i] < 0.0 || flip_angles_deg[i] > 180.0)
                throw DataError("flip angle out of [0,180] at frame " + std::to_string(i));
            if (!(tr_ms[i] > te_ms))
                throw DataError("TR must exceed TE at frame " + std::to_string(i));
        }
    }
};

// Fingerprint matrix: one column per atom, one row per frame. Column j belongs
// to params[j]. train_scale is set once the atoms have been rescaled for the
// tanh output range of the generator.
struct Dictionary {
    Eigen::MatrixXd atoms;  // n_frames x n_atoms
    std::vector<TissueParams> params;
    bool normalized = false;
    std::optional<double> train_scale;

    Eigen::Index n_frames() const { return atoms.rows(); }
    Eigen::Index n_atoms() const { return atoms.cols(); }

    void validate() const {
        if (static_cast<Eigen::Index>(params.size()) != atoms.cols())
            throw DataError("dictionary params/atoms mismatch: " + std::to_string(params.size()) +
                            " params, " + std::to_string(atoms.cols()) + " columns");
    }
};

struct DatasetSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    std::vector<std::size_t> test_idx;
};

} // namespace ganmrf
