#include "ganmrf/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ganmrf {

namespace {

constexpr double kAlignTolMs = 1e-9;

void check_segment(const GridSegment& s, const std::string& label, std::size_t i) {
    std::ostringstream name;
    name << label << " segment " << i << " [" << s.start_ms << "," << s.end_ms << "] step "
         << s.step_ms;
    if (!(s.step_ms > 0.0)) throw ConfigError("nonpositive step in " + name.str());
    if (s.start_ms > s.end_ms) throw ConfigError("start exceeds end in " + name.str());
    const double span = s.end_ms - s.start_ms;
    const double k = std::round(span / s.step_ms);
    if (std::abs(span - k * s.step_ms) > kAlignTolMs)
        throw ConfigError("end is not start plus a whole number of steps in " + name.str());
}

} // namespace

std::vector<double> segment_values(const std::vector<GridSegment>& segments,
                                   const std::string& label) {
    std::vector<double> values;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const GridSegment& s = segments[i];
        check_segment(s, label, i);
        if (i > 0 && !(s.start_ms > segments[i - 1].end_ms))
            throw ConfigError(label + " segments must be strictly ascending and non-overlapping");
        const auto n = static_cast<std::size_t>(std::round((s.end_ms - s.start_ms) / s.step_ms));
        for (std::size_t k = 0; k <= n; ++k) values.push_back(s.start_ms + double(k) * s.step_ms);
    }
    return values;
}

std::vector<TissueParams> expand_grid(const GridSpec& spec) {
    if (spec.t1_segments.empty() || spec.t2_segments.empty()) throw ConfigError("empty grid");
    const std::vector<double> t1 = segment_values(spec.t1_segments, "T1");
    const std::vector<double> t2 = segment_values(spec.t2_segments, "T2");
    std::vector<TissueParams> out;
    out.reserve(t1.size() * t2.size());
    for (double a : t1)
        for (double b : t2)
            if (b <= a) out.push_back({a, b});
    if (out.empty()) throw ConfigError("empty grid: no combination satisfies T2 <= T1");
    return out;
}

namespace {

std::vector<GridSegment> parse_segments(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("grid spec missing \"" + key + "\"");
    std::vector<GridSegment> segs;
    for (const auto& e : j.at(key)) {
        GridSegment s;
        s.start_ms = e.at("start").get<double>();
        s.end_ms = e.at("end").get<double>();
        s.step_ms = e.at("step").get<double>();
        segs.push_back(s);
    }
    return segs;
}

} // namespace

GridSpec parse_grid_spec(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad grid spec JSON: ") + e.what());
    }
    try {
        GridSpec spec;
        spec.t1_segments = parse_segments(j, "t1_segments");
        spec.t2_segments = parse_segments(j, "t2_segments");
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad grid spec fields: ") + e.what());
    }
}

GridSpec load_grid_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid spec file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_grid_spec(ss.str());
}

void save_grid_spec(const GridSpec& spec, const std::string& path) {
    nlohmann::json j;
    auto dump = [](const std::vector<GridSegment>& segs) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : segs) a.push_back({{"start", s.start_ms}, {"end", s.end_ms}, {"step", s.step_ms}});
        return a;
    };
    j["t1_segments"] = dump(spec.t1_segments);
    j["t2_segments"] = dump(spec.t2_segments);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write grid spec file: " + path);
    out << j.dump(2) << "\n";
}

GridSpec standard_grid_spec() {
    return GridSpec{
        {{10, 85, 5}, {90, 990, 10}, {1000, 1480, 20}, {1500, 2000, 50}, {2050, 2950, 100}},
        {{2, 8, 2}, {10, 145, 5}, {150, 190, 10}, {200, 500, 50}},
    };
}

GridSpec coarse_grid_spec() {
    return GridSpec{
        {{50, 100, 50}, {200, 1000, 100}, {1200, 2000, 200}, {2500, 3000, 500}},
        {{10, 100, 10}, {120, 200, 20}, {300, 500, 100}},
    };
}

GridSpec fine_grid_spec() {
    return GridSpec{
        {{2, 100, 2}, {105, 1000, 5}, {1010, 2000, 10}, {2025, 3000, 25}},
        {{1, 200, 1}, {202, 500, 2}},
    };
}

} // namespace ganmrf
