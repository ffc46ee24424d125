#include "ganmrf/match.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ganmrf/parallel.hpp"
#include "ganmrf/rng.hpp"

namespace ganmrf::match {

MatchResult match_voxel(const Eigen::VectorXd& signal, const Dictionary& dict) {
    if (!dict.normalized) throw DataError("pattern matching needs a normalized dictionary");
    if (signal.size() != dict.n_frames())
        throw DataError("signal has " + std::to_string(signal.size()) + " frames, dictionary has " +
                        std::to_string(dict.n_frames()));
    const double norm = signal.norm();
    if (norm == 0.0) throw DataError("cannot match a zero-norm signal");

    const Eigen::VectorXd scores = (dict.atoms.transpose() * (signal / norm)).cwiseAbs();
    Eigen::Index best = 0;
    double best_score = scores(0);
    for (Eigen::Index j = 1; j < scores.size(); ++j) {
        if (scores(j) > best_score) {
            best_score = scores(j);
            best = j;
        }
    }
    return {dict.params[std::size_t(best)], best_score, best};
}

ParameterMap match_volume(const VoxelGrid& signals, const Dictionary& dict, unsigned n_threads) {
    if (signals.signals.cols() != Eigen::Index(signals.width * signals.height))
        throw DataError("voxel grid dimensions do not match its signal matrix");
    if (signals.signals.rows() != dict.n_frames())
        throw DataError("voxel series have " + std::to_string(signals.signals.rows()) +
                        " frames, dictionary has " + std::to_string(dict.n_frames()));
    ParameterMap map;
    map.width = signals.width;
    map.height = signals.height;
    map.t1_map.assign(signals.width * signals.height, 0.0);
    map.t2_map.assign(signals.width * signals.height, 0.0);
    map.similarity_map.assign(signals.width * signals.height, 0.0);

    parallel_for(map.t1_map.size(), n_threads, [&](std::size_t k) {
        const Eigen::VectorXd sig = signals.signals.col(Eigen::Index(k));
        if (sig.norm() == 0.0) return;  // background
        const MatchResult r = match_voxel(sig, dict);
        map.t1_map[k] = r.params.t1_ms;
        map.t2_map[k] = r.params.t2_ms;
        map.similarity_map[k] = r.similarity;
    });
    return map;
}

namespace {

bool region_contains(const Region& r, double x, double y) {
    switch (r.shape) {
        case Region::Shape::Rect:
            return x >= r.a && x < r.a + r.c && y >= r.b && y < r.b + r.d;
        case Region::Shape::Disc: {
            const double dx = x - r.a, dy = y - r.b;
            return dx * dx + dy * dy <= r.c * r.c;
        }
    }
    return false;
}

void check_region(const Region& r, std::size_t i) {
    r.tissue.validate();
    const bool degenerate = r.shape == Region::Shape::Rect ? (r.c <= 0.0 || r.d <= 0.0) : r.c <= 0.0;
    if (degenerate) throw ConfigError("phantom region " + std::to_string(i) + " has zero area");
}

} // namespace

std::pair<Phantom, VoxelGrid> make_phantom(const PhantomSpec& spec, const SequenceParams& seq,
                                           const SliceProfile& profile, const SimGrid& grid,
                                           double noise_sigma, std::uint64_t seed,
                                           unsigned n_threads) {
    if (spec.width == 0 || spec.height == 0) throw ConfigError("phantom dimensions must be positive");
    if (noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");

    Phantom phantom;
    phantom.width = spec.width;
    phantom.height = spec.height;
    phantom.t1_map.assign(spec.width * spec.height, 0.0);
    phantom.t2_map.assign(spec.width * spec.height, 0.0);

    // Later regions overwrite earlier ones. Pixel centers sample the geometry.
    std::vector<int> label(spec.width * spec.height, -1);
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        check_region(spec.regions[i], i);
        for (std::size_t py = 0; py < spec.height; ++py)
            for (std::size_t px = 0; px < spec.width; ++px)
                if (region_contains(spec.regions[i], double(px) + 0.5, double(py) + 0.5))
                    label[py * spec.width + px] = int(i);
    }

    // Distinct tissues are simulated once and shared across their pixels.
    std::vector<TissueParams> tissues;
    std::map<std::pair<double, double>, std::size_t> tissue_index;
    std::vector<std::size_t> region_tissue(spec.regions.size());
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        const auto key = std::make_pair(spec.regions[i].tissue.t1_ms, spec.regions[i].tissue.t2_ms);
        const auto it = tissue_index.find(key);
        if (it == tissue_index.end()) {
            tissue_index.emplace(key, tissues.size());
            region_tissue[i] = tissues.size();
            tissues.push_back(spec.regions[i].tissue);
        } else {
            region_tissue[i] = it->second;
        }
    }

    VoxelGrid gridout;
    gridout.width = spec.width;
    gridout.height = spec.height;
    gridout.signals =
        Eigen::MatrixXd::Zero(Eigen::Index(seq.n_frames()), Eigen::Index(spec.width * spec.height));

    if (!tissues.empty()) {
        const Dictionary fps = simulate_dictionary(tissues, seq, profile, grid, n_threads);
        std::vector<double> sigma(tissues.size());
        for (std::size_t t = 0; t < tissues.size(); ++t)
            sigma[t] = noise_sigma * fps.atoms.col(Eigen::Index(t)).norm() /
                       std::sqrt(double(seq.n_frames()));

        // Noise drawn serially in pixel order so the result is seed-stable.
        Rng rng(seed);
        for (std::size_t k = 0; k < label.size(); ++k) {
            if (label[k] < 0) continue;
            const std::size_t t = region_tissue[std::size_t(label[k])];
            phantom.t1_map[k] = tissues[t].t1_ms;
            phantom.t2_map[k] = tissues[t].t2_ms;
            Eigen::VectorXd sig = fps.atoms.col(Eigen::Index(t));
            if (noise_sigma > 0.0)
                for (Eigen::Index f = 0; f < sig.size(); ++f) sig(f) += sigma[t] * rng.normal();
            gridout.signals.col(Eigen::Index(k)) = sig;
        }
    }
    return {std::move(phantom), std::move(gridout)};
}

PhantomSpec default_phantom_spec() {
    PhantomSpec spec;
    spec.width = 48;
    spec.height = 48;
    // Concentric discs: white matter ring, gray matter ring, CSF core.
    spec.regions.push_back({Region::Shape::Disc, 24.0, 24.0, 20.0, 0.0, {950.0, 40.0}});
    spec.regions.push_back({Region::Shape::Disc, 24.0, 24.0, 12.0, 0.0, {1500.0, 60.0}});
    spec.regions.push_back({Region::Shape::Disc, 24.0, 24.0, 5.0, 0.0, {2950.0, 500.0}});
    return spec;
}

PhantomSpec load_phantom_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open phantom spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
        PhantomSpec spec;
        spec.width = j.at("width").get<std::size_t>();
        spec.height = j.at("height").get<std::size_t>();
        for (const auto& rj : j.at("regions")) {
            Region r;
            const std::string shape = rj.at("shape").get<std::string>();
            if (shape == "rect") {
                r.shape = Region::Shape::Rect;
                r.a = rj.at("x").get<double>();
                r.b = rj.at("y").get<double>();
                r.c = rj.at("w").get<double>();
                r.d = rj.at("h").get<double>();
            } else if (shape == "disc") {
                r.shape = Region::Shape::Disc;
                r.a = rj.at("cx").get<double>();
                r.b = rj.at("cy").get<double>();
                r.c = rj.at("r").get<double>();
            } else {
                throw ConfigError("unknown region shape: " + shape);
            }
            r.tissue.t1_ms = rj.at("t1_ms").get<double>();
            r.tissue.t2_ms = rj.at("t2_ms").get<double>();
            spec.regions.push_back(r);
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad phantom spec " + path + ": " + e.what());
    }
}

void save_phantom_spec(const PhantomSpec& spec, const std::string& path) {
    nlohmann::json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["regions"] = nlohmann::json::array();
    for (const auto& r : spec.regions) {
        nlohmann::json rj;
        if (r.shape == Region::Shape::Rect) {
            rj["shape"] = "rect";
            rj["x"] = r.a;
            rj["y"] = r.b;
            rj["w"] = r.c;
            rj["h"] = r.d;
        } else {
            rj["shape"] = "disc";
            rj["cx"] = r.a;
            rj["cy"] = r.b;
            rj["r"] = r.c;
        }
        rj["t1_ms"] = r.tissue.t1_ms;
        rj["t2_ms"] = r.tissue.t2_ms;
        j["regions"].push_back(rj);
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write phantom spec: " + path);
    out << j.dump(2) << "\n";
}

double rel_rmse(const std::vector<double>& map_a, const std::vector<double>& map_b) {
    if (map_a.size() != map_b.size()) throw DataError("maps differ in size");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < map_a.size(); ++k) {
        if (map_b[k] == 0.0) continue;
        num += (map_a[k] - map_b[k]) * (map_a[k] - map_b[k]);
        den += map_b[k] * map_b[k];
    }
    if (den == 0.0) throw DataError("relative RMSE foreground is empty");
    return 100.0 * std::sqrt(num) / std::sqrt(den);
}

DiffMap diff_map(const std::vector<double>& map_a, const std::vector<double>& map_b, double scale) {
    if (map_a.size() != map_b.size()) throw DataError("maps differ in size");
    DiffMap d;
    d.values.resize(map_a.size());
    for (std::size_t k = 0; k < map_a.size(); ++k) d.values[k] = (map_a[k] - map_b[k]) * scale;
    const auto [lo, hi] = std::minmax_element(d.values.begin(), d.values.end());
    d.min_value = d.values.empty() ? 0.0 : *lo;
    d.max_value = d.values.empty() ? 0.0 : *hi;
    return d;
}

void write_map_csv(const ParameterMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write map CSV: " + path);
    out << "x,y,t1_ms,t2_ms,similarity\n";
    out.precision(12);
    for (std::size_t y = 0; y < map.height; ++y)
        for (std::size_t x = 0; x < map.width; ++x) {
            const std::size_t k = y * map.width + x;
            out << x << "," << y << "," << map.t1_map[k] << "," << map.t2_map[k] << ","
                << map.similarity_map[k] << "\n";
        }
}

ParameterMap load_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open map CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,y,t1_ms,t2_ms,similarity", 0) != 0)
        throw DataError("map CSV header mismatch: " + path);
    struct Row {
        std::size_t x, y;
        double t1, t2, sim;
    };
    std::vector<Row> rows;
    std::size_t max_x = 0, max_y = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r{};
        char c1, c2, c3, c4;
        std::istringstream ss(line);
        if (!(ss >> r.x >> c1 >> r.y >> c2 >> r.t1 >> c3 >> r.t2 >> c4 >> r.sim))
            throw DataError("bad map CSV row: " + line);
        rows.push_back(r);
        max_x = std::max(max_x, r.x);
        max_y = std::max(max_y, r.y);
    }
    if (rows.empty()) throw DataError("map CSV has no pixels: " + path);
    ParameterMap map;
    map.width = max_x + 1;
    map.height = max_y + 1;
    if (rows.size() != map.width * map.height)
        throw DataError("map CSV does not cover a full rectangle: " + path);
    map.t1_map.assign(rows.size(), 0.0);
    map.t2_map.assign(rows.size(), 0.0);
    map.similarity_map.assign(rows.size(), 0.0);
    for (const auto& r : rows) {
        const std::size_t k = r.y * map.width + r.x;
        map.t1_map[k] = r.t1;
        map.t2_map[k] = r.t2;
        map.similarity_map[k] = r.sim;
    }
    return map;
}

void write_map_pgm(const std::vector<double>& values, std::size_t width, std::size_t height,
                   const std::string& path) {
    if (values.size() != width * height) throw DataError("PGM dimensions do not match the data");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = std::min(0.0, *lo_it);  // keep background black for non-negative maps
    const double hi = *hi_it;
    const double span = hi - lo;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write PGM: " + path);
    out << "P5\n" << width << " " << height << "\n65535\n";
    for (double v : values) {
        const auto gray =
            std::uint16_t(span > 0.0 ? std::lround(std::clamp((v - lo) / span, 0.0, 1.0) * 65535.0)
                                     : 0);
        // PGM samples above 255 are big-endian two-byte values.
        const char bytes[2] = {char(gray >> 8), char(gray & 0xff)};
        out.write(bytes, 2);
    }
    std::ofstream sidecar(path + ".scale.txt");
    sidecar << "value = " << lo << " + gray * " << (span / 65535.0) << "  (value range [" << lo
            << ", " << hi << "], gray range 0..65535)\n";
}

} // namespace ganmrf::match
