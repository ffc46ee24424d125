#include "ganmrf/bloch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ganmrf/parallel.hpp"
#include "ganmrf/rng.hpp"

namespace ganmrf {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void SliceProfile::validate() const {
    if (fa_scale.empty()) throw ConfigError("slice profile is empty");
    if (positions.size() != fa_scale.size())
        throw ConfigError("slice profile positions/scales length mismatch");
    double max_scale = 0.0;
    for (std::size_t i = 0; i < fa_scale.size(); ++i) {
        if (fa_scale[i] < 0.0) throw ConfigError("negative flip-angle scale in slice profile");
        max_scale = std::max(max_scale, fa_scale[i]);
        if (std::abs(fa_scale[i] - fa_scale[fa_scale.size() - 1 - i]) > 1e-12)
            throw ConfigError("slice profile is not symmetric about the slice center");
    }
    if (std::abs(max_scale - 1.0) > 1e-12)
        throw ConfigError("slice profile peak scale must be 1");
}

IsochromatState rf_rotate(const IsochromatState& state, double alpha_deg, double phase_deg) {
    const double alpha = alpha_deg * kDegToRad;
    const double phase = phase_deg * kDegToRad;
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double nx = std::cos(phase), ny = std::sin(phase);
    const double mx = state.mx, my = state.my, mz = state.mz;
    // v' = v cos(a) - (n x v) sin(a) + n (n.v)(1 - cos(a)),  n = (nx, ny, 0)
    const double cx = ny * mz;            // (n x v).x
    const double cy = -nx * mz;           // (n x v).y
    const double cz = nx * my - ny * mx;  // (n x v).z
    const double ndot = nx * mx + ny * my;
    IsochromatState out;
    out.mx = mx * ca - cx * sa + nx * ndot * (1.0 - ca);
    out.my = my * ca - cy * sa + ny * ndot * (1.0 - ca);
    out.mz = mz * ca - cz * sa;
    return out;
}

IsochromatState relax(const IsochromatState& state, double dt_ms, const TissueParams& tissue) {
    if (dt_ms < 0.0) throw DataError("relaxation interval must be non-negative");
    const double e2 = std::exp(-dt_ms / tissue.t2_ms);
    const double e1 = std::exp(-dt_ms / tissue.t1_ms);
    return {state.mx * e2, state.my * e2, state.mz * e1 + (1.0 - e1)};
}

IsochromatState dephase(const IsochromatState& state, double phi_rad) {
    const double c = std::cos(phi_rad), s = std::sin(phi_rad);
    return {state.mx * c - state.my * s, state.mx * s + state.my * c, state.mz};
}

SliceProfile default_slice_profile(std::size_t n_positions) {
    if (n_positions < 1) throw ConfigError("profile needs at least one position");
    SliceProfile prof;
    prof.description = "hann_sinc3";
    prof.positions.resize(n_positions);
    prof.fa_scale.resize(n_positions);

    // Hann-windowed sinc with zeros at +-1, +-2 (three lobes over tau in [-2,2]).
    constexpr std::size_t kPulseSamples = 4001;
    std::vector<double> pulse(kPulseSamples);
    for (std::size_t m = 0; m < kPulseSamples; ++m) {
        const double tau = -2.0 + 4.0 * double(m) / double(kPulseSamples - 1);
        const double sinc = tau == 0.0 ? 1.0 : std::sin(std::numbers::pi * tau) / (std::numbers::pi * tau);
        const double hann = 0.5 * (1.0 + std::cos(std::numbers::pi * tau / 2.0));
        pulse[m] = sinc * hann;
    }

    double peak = 0.0;
    for (std::size_t p = 0; p < n_positions; ++p) {
        const double u = n_positions == 1
                             ? 0.0
                             : -1.0 + 2.0 * double(p) / double(n_positions - 1);
        prof.positions[p] = u;
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t m = 0; m < kPulseSamples; ++m) {
            const double tau = -2.0 + 4.0 * double(m) / double(kPulseSamples - 1);
            acc += pulse[m] * std::polar(1.0, -2.0 * std::numbers::pi * u * tau);
        }
        prof.fa_scale[p] = std::abs(acc);
        peak = std::max(peak, prof.fa_scale[p]);
    }
    for (double& s : prof.fa_scale) s /= peak;
    // The response is analytically symmetric; pin it exactly so the invariant
    // holds to the last bit after rounding.
    for (std::size_t i = 0; i < n_positions / 2; ++i) {
        const double avg = 0.5 * (prof.fa_scale[i] + prof.fa_scale[n_positions - 1 - i]);
        prof.fa_scale[i] = prof.fa_scale[n_positions - 1 - i] = avg;
    }
    prof.validate();
    return prof;
}

SequenceParams default_sequence(std::size_t n_frames, std::uint64_t seed) {
    if (n_frames < 1) throw ConfigError("sequence needs at least one frame");
    Rng rng(seed);
    SequenceParams seq;
    seq.flip_angles_deg.resize(n_frames);
    seq.tr_ms.resize(n_frames);

    // Half-sine lobes of 200 frames; the first lobe peaks at the full 70
    // degrees, later lobe amplitudes are drawn from [30, 70]. The clip floor
    // puts the inter-lobe nulls at exactly 5 degrees.
    constexpr std::size_t kLobe = 200;
    const std::size_t n_lobes = (n_frames + kLobe - 1) / kLobe;
    std::vector<double> amps(n_lobes);
    for (std::size_t l = 0; l < n_lobes; ++l) amps[l] = rng.uniform(30.0, 70.0);
    amps[0] = 70.0;
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::size_t l = i / kLobe;
        const double x = std::sin(std::numbers::pi * double(i % kLobe) / double(kLobe));
        seq.flip_angles_deg[i] = std::max(5.0, amps[l] * x);
    }

    // Smooth pseudo-random TR: a few seeded sinusoids, rescaled so the series
    // spans [12.07, 14.73] exactly.
    constexpr double kTrLo = 12.07, kTrHi = 14.73;
    if (n_frames == 1) {
        seq.tr_ms[0] = 0.5 * (kTrLo + kTrHi);
    } else {
        std::vector<double> raw(n_frames, 0.0);
        for (int k = 0; k < 4; ++k) {
            const double freq = rng.uniform(1.0, 6.0);
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double amp = rng.uniform(0.5, 1.0);
            for (std::size_t i = 0; i < n_frames; ++i)
                raw[i] += amp * std::sin(2.0 * std::numbers::pi * freq * double(i) / double(n_frames) + phase);
        }
        const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
        const double lo = *lo_it, hi = *hi_it;
        for (std::size_t i = 0; i < n_frames; ++i)
            seq.tr_ms[i] = kTrLo + (kTrHi - kTrLo) * (raw[i] - lo) / (hi - lo);
    }
    seq.validate();
    return seq;
}

std::vector<double> simulate_fingerprint(const TissueParams& tissue, const SequenceParams& seq,
                                         const SliceProfile& profile, const SimGrid& grid) {
    tissue.validate();
    seq.validate();
    profile.validate();
    grid.validate();
    if (profile.size() != grid.n_profile)
        throw DataError("slice profile has " + std::to_string(profile.size()) +
                        " positions but the grid expects " + std::to_string(grid.n_profile));

    const std::size_t n_frames = seq.n_frames();
    const std::size_t P = grid.n_profile, Q = grid.n_dephase;
    std::vector<std::complex<double>> series(n_frames, {0.0, 0.0});

    // Precompute per-frame relaxation factors; they are shared by every
    // isochromat of this tissue.
    const double e2_te = std::exp(-seq.te_ms / tissue.t2_ms);
    const double e1_te = std::exp(-seq.te_ms / tissue.t1_ms);
    std::vector<double> e2_rec(n_frames), e1_rec(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const double rec = seq.tr_ms[i] - seq.te_ms;
        e2_rec[i] = std::exp(-rec / tissue.t2_ms);
        e1_rec[i] = std::exp(-rec / tissue.t1_ms);
    }

    // Fixed p-major, q-minor accumulation order keeps the reduction
    // deterministic.
    for (std::size_t p = 0; p < P; ++p) {
        const double scale = profile.fa_scale[p];
        for (std::size_t q = 0; q < Q; ++q) {
            const double phi = (double(q) + 0.5) * 2.0 * std::numbers::pi / double(Q);
            IsochromatState m;  // (0, 0, 1)
            if (seq.inversion_enabled) {
                m = rf_rotate(m, 180.0, 0.0);
                m = relax(m, seq.ti_ms, tissue);
            }
            for (std::size_t i = 0; i < n_frames; ++i) {
                m = rf_rotate(m, scale * seq.flip_angles_deg[i], 0.0);
                m.mx *= e2_te;
                m.my *= e2_te;
                m.mz = m.mz * e1_te + (1.0 - e1_te);
                series[i] += std::complex<double>(m.mx, m.my);
                m.mx *= e2_rec[i];
                m.my *= e2_rec[i];
                m.mz = m.mz * e1_rec[i] + (1.0 - e1_rec[i]);
                m = dephase(m, phi);
            }
        }
    }

    const double inv_count = 1.0 / double(P * Q);
    for (auto& s : series) s *= inv_count;

    // Align the series phase to the largest-magnitude sample (lowest index on
    // ties) and keep the real part.
    std::size_t peak = 0;
    double peak_mag = std::abs(series[0]);
    for (std::size_t i = 1; i < n_frames; ++i) {
        const double mag = std::abs(series[i]);
        if (mag > peak_mag) {
            peak_mag = mag;
            peak = i;
        }
    }
    std::vector<double> signal(n_frames, 0.0);
    if (peak_mag > 0.0) {
        const std::complex<double> rot = std::conj(series[peak] / peak_mag);
        for (std::size_t i = 0; i < n_frames; ++i) signal[i] = (series[i] * rot).real();
    }
    return signal;
}

Dictionary simulate_dictionary(const std::vector<TissueParams>& params, const SequenceParams& seq,
                               const SliceProfile& profile, const SimGrid& grid,
                               unsigned n_threads, double* elapsed_seconds) {
    if (params.empty()) throw DataError("cannot simulate an empty parameter list");
    Dictionary dict;
    dict.params = params;
    dict.atoms.resize(static_cast<Eigen::Index>(seq.n_frames()),
                      static_cast<Eigen::Index>(params.size()));

    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(params.size(), n_threads, [&](std::size_t j) {
        const std::vector<double> sig = simulate_fingerprint(params[j], seq, profile, grid);
        for (std::size_t i = 0; i < sig.size(); ++i)
            dict.atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sig[i];
    });
    const auto t1 = std::chrono::steady_clock::now();
    if (elapsed_seconds) *elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
    return dict;
}

SequenceParams load_sequence_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sequence file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("flip_angle_deg,tr_ms", 0) != 0)
        throw ConfigError("sequence file must start with header flip_angle_deg,tr_ms: " + path);
    SequenceParams seq;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double fa = 0.0, tr = 0.0;
        char comma = 0;
        if (!(ss >> fa >> comma >> tr) || comma != ',')
            throw ConfigError("bad sequence row at line " + std::to_string(lineno) + ": " + path);
        seq.flip_angles_deg.push_back(fa);
        seq.tr_ms.push_back(tr);
    }
    if (seq.flip_angles_deg.empty()) throw ConfigError("sequence file has no frames: " + path);
    return seq;
}

void save_sequence_csv(const SequenceParams& seq, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write sequence file: " + path);
    out << "flip_angle_deg,tr_ms\n";
    out.precision(17);
    for (std::size_t i = 0; i < seq.n_frames(); ++i)
        out << seq.flip_angles_deg[i] << "," << seq.tr_ms[i] << "\n";
}

SliceProfile load_slice_profile_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("position,fa_scale", 0) != 0)
        throw ConfigError("profile file must start with header position,fa_scale: " + path);
    SliceProfile prof;
    prof.description = path;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double pos = 0.0, scale = 0.0;
        char comma = 0;
        if (!(ss >> pos >> comma >> scale) || comma != ',')
            throw ConfigError("bad profile row at line " + std::to_string(lineno) + ": " + path);
        prof.positions.push_back(pos);
        prof.fa_scale.push_back(scale);
    }
    prof.validate();
    return prof;
}

void save_slice_profile_csv(const SliceProfile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write profile file: " + path);
    out << "position,fa_scale\n";
    out.precision(17);
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << profile.positions[i] << "," << profile.fa_scale[i] << "\n";
}

} // namespace ganmrf
