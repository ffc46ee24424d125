#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ganmrf/dataset.hpp"
#include "ganmrf/grid.hpp"
#include "ganmrf/match.hpp"
#include "ganmrf/rng.hpp"

using namespace ganmrf;

namespace {

// Shared fixture: the coarse dictionary at reduced simulation density. The
// matcher contracts do not depend on P/Q, so the cheap grid keeps tests fast.
const SequenceParams& test_sequence() {
    static const SequenceParams seq = default_sequence(200, 7);
    return seq;
}

const Dictionary& coarse_dict() {
    static const Dictionary dict = [] {
        const auto params = expand_grid(coarse_grid_spec());
        return normalize_atoms(
            simulate_dictionary(params, test_sequence(), default_slice_profile(11), {11, 20}, 0));
    }();
    return dict;
}

} // namespace

TEST_CASE("matching its own atoms returns their parameters with similarity 1") {
    const Dictionary& dict = coarse_dict();
    for (Eigen::Index j = 0; j < dict.n_atoms(); j += 37) {
        const auto r = match::match_voxel(dict.atoms.col(j), dict);
        CHECK(r.atom == j);
        CHECK(r.params == dict.params[std::size_t(j)]);
        CHECK(std::abs(r.similarity - 1.0) <= 1e-9);
    }
}

TEST_CASE("matching is invariant to positive scaling of the probe") {
    const Dictionary& dict = coarse_dict();
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd s(dict.n_frames());
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.normal();
        const double c = std::exp(rng.uniform(-4.0, 4.0));
        const auto a = match::match_voxel(s, dict);
        const auto b = match::match_voxel(c * s, dict);
        CHECK(a.atom == b.atom);
    }
    const auto base = match::match_voxel(dict.atoms.col(5), dict);
    const auto scaled = match::match_voxel(3.7 * dict.atoms.col(5), dict);
    CHECK(base.atom == scaled.atom);
    CHECK(scaled.similarity == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("matching rejects a zero-norm probe") {
    CHECK_THROWS_AS(match::match_voxel(Eigen::VectorXd::Zero(coarse_dict().n_frames()),
                                       coarse_dict()),
                    DataError);
}

TEST_CASE("noisy atoms at 30 dB SNR are recovered exactly at least 95% of the time") {
    const Dictionary& dict = coarse_dict();
    // Noise in amplitude terms: per-sample sigma = rms(signal) * 10^(-30/20).
    Rng rng(11);
    int hits = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const auto j = Eigen::Index(rng.uniform_u64(std::uint64_t(dict.n_atoms())));
        Eigen::VectorXd s = dict.atoms.col(j);
        const double sigma = s.norm() / std::sqrt(double(s.size())) * std::pow(10.0, -30.0 / 20.0);
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) += sigma * rng.normal();
        if (match::match_voxel(s, dict).atom == j) ++hits;
    }
    CHECK(hits >= 95);
}

TEST_CASE("match_volume handles background and recovers exact tilings") {
    const Dictionary& dict = coarse_dict();

    match::VoxelGrid empty;
    empty.width = 4;
    empty.height = 3;
    empty.signals = Eigen::MatrixXd::Zero(dict.n_frames(), 12);
    const auto zero_map = match::match_volume(empty, dict);
    for (std::size_t k = 0; k < 12; ++k) {
        CHECK(zero_map.t1_map[k] == 0.0);
        CHECK(zero_map.t2_map[k] == 0.0);
        CHECK(zero_map.similarity_map[k] == 0.0);
    }

    match::VoxelGrid tiled;
    tiled.width = 6;
    tiled.height = 5;
    tiled.signals.resize(dict.n_frames(), 30);
    std::vector<Eigen::Index> truth(30);
    for (std::size_t k = 0; k < 30; ++k) {
        truth[k] = Eigen::Index((7 * k) % std::size_t(dict.n_atoms()));
        tiled.signals.col(Eigen::Index(k)) = dict.atoms.col(truth[k]);
    }
    const auto map = match::match_volume(tiled, dict);
    for (std::size_t k = 0; k < 30; ++k) {
        CHECK(map.t1_map[k] == dict.params[std::size_t(truth[k])].t1_ms);
        CHECK(map.t2_map[k] == dict.params[std::size_t(truth[k])].t2_ms);
    }

    const auto serial = match::match_volume(tiled, dict, 1);
    const auto parallel = match::match_volume(tiled, dict, 4);
    CHECK(serial.t1_map == parallel.t1_map);
    CHECK(serial.t2_map == parallel.t2_map);
    CHECK(serial.similarity_map == parallel.similarity_map);
}

TEST_CASE("phantom with grid tissues and no noise is recovered exactly") {
    match::PhantomSpec spec;
    spec.width = 10;
    spec.height = 8;
    spec.regions.push_back({match::Region::Shape::Rect, 0, 0, 5, 8, {900.0, 90.0}});
    spec.regions.push_back({match::Region::Shape::Disc, 7, 4, 2, 0, {2000.0, 300.0}});

    const SimGrid grid{11, 20};
    const auto [phantom, signals] = match::make_phantom(spec, test_sequence(),
                                                        default_slice_profile(11), grid, 0.0, 1);
    const auto map = match::match_volume(signals, coarse_dict());
    for (std::size_t k = 0; k < phantom.size(); ++k) {
        CHECK(map.t1_map[k] == phantom.t1_map[k]);
        CHECK(map.t2_map[k] == phantom.t2_map[k]);
    }
}

TEST_CASE("phantom synthesis is seed-stable and seed-sensitive") {
    match::PhantomSpec spec;
    spec.width = 6;
    spec.height = 6;
    spec.regions.push_back({match::Region::Shape::Disc, 3, 3, 2.5, 0, {1000.0, 100.0}});
    const SimGrid grid{5, 8};
    const auto a = match::make_phantom(spec, test_sequence(), default_slice_profile(5), grid, 0.05, 9);
    const auto b = match::make_phantom(spec, test_sequence(), default_slice_profile(5), grid, 0.05, 9);
    const auto c = match::make_phantom(spec, test_sequence(), default_slice_profile(5), grid, 0.05, 10);
    CHECK(a.second.signals == b.second.signals);
    CHECK(a.second.signals != c.second.signals);
}

TEST_CASE("default phantom carries the three exemplar tissues") {
    const match::PhantomSpec spec = match::default_phantom_spec();
    const SimGrid grid{5, 8};
    const auto [phantom, signals] =
        match::make_phantom(spec, test_sequence(), default_slice_profile(5), grid, 0.0, 1);
    std::set<std::pair<double, double>> labels;
    for (std::size_t k = 0; k < phantom.size(); ++k)
        if (phantom.t1_map[k] > 0.0) labels.insert({phantom.t1_map[k], phantom.t2_map[k]});
    CHECK(labels == std::set<std::pair<double, double>>{
                        {950.0, 40.0}, {1500.0, 60.0}, {2950.0, 500.0}});
}

TEST_CASE("later phantom regions win overlaps and degenerate regions are rejected") {
    match::PhantomSpec spec;
    spec.width = 4;
    spec.height = 4;
    spec.regions.push_back({match::Region::Shape::Rect, 0, 0, 4, 4, {900.0, 90.0}});
    spec.regions.push_back({match::Region::Shape::Rect, 0, 0, 4, 4, {2000.0, 300.0}});
    const SimGrid grid{3, 4};
    const auto [phantom, signals] =
        match::make_phantom(spec, test_sequence(), default_slice_profile(3), grid, 0.0, 1);
    for (std::size_t k = 0; k < phantom.size(); ++k) CHECK(phantom.t1_map[k] == 2000.0);

    match::PhantomSpec bad = spec;
    bad.regions.push_back({match::Region::Shape::Disc, 2, 2, 0.0, 0, {1000.0, 100.0}});
    CHECK_THROWS_AS(match::make_phantom(bad, test_sequence(), default_slice_profile(3), grid, 0.0, 1),
                    ConfigError);
}

TEST_CASE("phantom spec files round-trip") {
    const auto path = std::filesystem::temp_directory_path() / "ganmrf_phantom.json";
    match::save_phantom_spec(match::default_phantom_spec(), path.string());
    const match::PhantomSpec back = match::load_phantom_spec(path.string());
    CHECK(back.width == 48);
    REQUIRE(back.regions.size() == 3);
    CHECK(back.regions[2].tissue.t1_ms == 2950.0);
    CHECK(back.regions[2].shape == match::Region::Shape::Disc);
    std::filesystem::remove(path);
}

TEST_CASE("rel_rmse fixed points, mask, and permutation invariance") {
    const std::vector<double> b{100, 200, 0, 400};
    CHECK(match::rel_rmse(b, b) == 0.0);

    std::vector<double> a(b);
    for (auto& v : a) v *= 1.01;
    CHECK(match::rel_rmse(a, b) == doctest::Approx(1.0).epsilon(1e-12));

    // Background pixel of the benchmark is masked out entirely.
    std::vector<double> a2(b);
    a2[2] = 999.0;
    CHECK(match::rel_rmse(a2, b) == 0.0);

    const std::vector<double> zero(4, 0.0);
    CHECK_THROWS_AS(match::rel_rmse(a, zero), DataError);
    CHECK_THROWS_AS(match::rel_rmse(std::vector<double>{1.0}, b), DataError);

    // Common permutation of both maps leaves the error unchanged.
    Rng rng(2);
    std::vector<double> pa{5, 6, 7, 8, 9}, pb{5.5, 6.5, 7, 8.1, 9.2};
    const double before = match::rel_rmse(pa, pb);
    auto perm = rng.permutation(5);
    std::vector<double> qa(5), qb(5);
    for (std::size_t i = 0; i < 5; ++i) {
        qa[i] = pa[perm[i]];
        qb[i] = pb[perm[i]];
    }
    CHECK(match::rel_rmse(qa, qb) == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("diff_map scales, reports the legend range, and is antisymmetric") {
    const std::vector<double> a{10, 13, 20}, b{10, 10, 26};
    const auto same = match::diff_map(a, a);
    for (double v : same.values) CHECK(v == 0.0);

    const auto d = match::diff_map(a, b, 10.0);
    CHECK(d.values[0] == 0.0);
    CHECK(d.values[1] == 30.0);
    CHECK(d.values[2] == -60.0);
    CHECK(d.min_value == -60.0);
    CHECK(d.max_value == 30.0);

    const auto r = match::diff_map(b, a, 10.0);
    for (std::size_t i = 0; i < d.values.size(); ++i) CHECK(d.values[i] == -r.values[i]);
}

TEST_CASE("map CSV and PGM writers emit the documented formats") {
    match::ParameterMap map;
    map.width = 3;
    map.height = 2;
    map.t1_map = {0, 100, 200, 300, 400, 500};
    map.t2_map = {0, 10, 20, 30, 40, 50};
    map.similarity_map = {0, 0.9, 0.8, 0.7, 0.6, 0.5};

    const auto csv = std::filesystem::temp_directory_path() / "ganmrf_map.csv";
    match::write_map_csv(map, csv.string());
    const match::ParameterMap back = match::load_map_csv(csv.string());
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.t1_map == map.t1_map);
    CHECK(back.t2_map == map.t2_map);
    std::filesystem::remove(csv);

    const auto pgm = std::filesystem::temp_directory_path() / "ganmrf_map.pgm";
    match::write_map_pgm(map.t1_map, 3, 2, pgm.string());
    std::ifstream in(pgm, std::ios::binary);
    std::string magic, dims, maxval;
    std::getline(in, magic);
    std::getline(in, dims);
    std::getline(in, maxval);
    CHECK(magic == "P5");
    CHECK(dims == "3 2");
    CHECK(maxval == "65535");
    std::vector<unsigned char> bytes(12);
    in.read(reinterpret_cast<char*>(bytes.data()), 12);
    CHECK(in.gcount() == 12);
    // Max value maps to 65535, zero to 0.
    CHECK((bytes[10] << 8 | bytes[11]) == 65535);
    CHECK((bytes[0] << 8 | bytes[1]) == 0);
    CHECK(std::filesystem::exists(pgm.string() + ".scale.txt"));
    std::filesystem::remove(pgm);
    std::filesystem::remove(pgm.string() + ".scale.txt");
}

TEST_CASE("match_volume rejects frame mismatches") {
    match::VoxelGrid g;
    g.width = 1;
    g.height = 1;
    g.signals = Eigen::MatrixXd::Ones(10, 1);
    CHECK_THROWS_AS(match::match_volume(g, coarse_dict()), DataError);
}
