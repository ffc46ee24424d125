#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganmrf/bloch.hpp"
#include "ganmrf/types.hpp"

namespace ganmrf::match {

// Ground-truth test object: per-pixel T1/T2 in ms, 0 marking background.
struct Phantom {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> t1_map;  // row-major, width*height
    std::vector<double> t2_map;

    std::size_t size() const { return width * height; }
};

struct Region {
    enum class Shape { Rect, Disc } shape = Shape::Rect;
    // rect: x, y, w, h   disc: cx, cy, r
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    TissueParams tissue;
};

struct PhantomSpec {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Region> regions;
};

// Measured/simulated series per pixel, stored as a frames x pixels matrix
// (column k is pixel k in row-major order). Zero columns are background.
struct VoxelGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    Eigen::MatrixXd signals;
};

struct ParameterMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> t1_map;
    std::vector<double> t2_map;
    std::vector<double> similarity_map;
};

// Maximum absolute normalized inner product over the dictionary columns; ties
// break to the lowest column index.
struct MatchResult {
    TissueParams params;
    double similarity = 0.0;
    Eigen::Index atom = 0;
};
MatchResult match_voxel(const Eigen::VectorXd& signal, const Dictionary& dict);

// Per-pixel match_voxel; zero-norm pixels become background (0,0) with
// similarity 0. Parallel over pixels with thread-count-independent output.
ParameterMap match_volume(const VoxelGrid& signals, const Dictionary& dict,
                          unsigned n_threads = 0);

// Rasterizes the regions (later regions win overlaps) and attaches to every
// foreground pixel its tissue fingerprint plus seeded white Gaussian noise of
// std noise_sigma * ||fingerprint|| / sqrt(n_frames). Each distinct tissue is
// simulated once.
std::pair<Phantom, VoxelGrid> make_phantom(const PhantomSpec& spec, const SequenceParams& seq,
                                           const SliceProfile& profile, const SimGrid& grid,
                                           double noise_sigma, std::uint64_t seed,
                                           unsigned n_threads = 0);

// Three-tissue concentric disc phantom (white matter, gray matter, CSF).
PhantomSpec default_phantom_spec();

PhantomSpec load_phantom_spec(const std::string& path);
void save_phantom_spec(const PhantomSpec& spec, const std::string& path);

// 100 * ||a-b|| / ||b|| over the foreground (nonzero pixels of map_b).
double rel_rmse(const std::vector<double>& map_a, const std::vector<double>& map_b);

struct DiffMap {
    std::vector<double> values;  // (a-b) * scale
    double min_value = 0.0;
    double max_value = 0.0;
};
DiffMap diff_map(const std::vector<double>& map_a, const std::vector<double>& map_b,
                 double scale = 10.0);

// Map CSV: "x,y,t1_ms,t2_ms,similarity", one row per pixel.
void write_map_csv(const ParameterMap& map, const std::string& path);
ParameterMap load_map_csv(const std::string& path);

// 16-bit PGM with a sidecar <path>.scale.txt recording value = gray *
// max_value / 65535.
void write_map_pgm(const std::vector<double>& values, std::size_t width, std::size_t height,
                   const std::string& path);

} // namespace ganmrf::match
