#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganmrf/types.hpp"

namespace ganmrf {

// Magnetization of one spin packet, dimensionless with equilibrium M0 = 1.
struct IsochromatState {
    double mx = 0.0;
    double my = 0.0;
    double mz = 1.0;
};

// Through-slice excitation weighting. fa_scale is symmetric about the slice
// center with max equal to 1.
struct SliceProfile {
    std::vector<double> positions;
    std::vector<double> fa_scale;
    std::string description;

    std::size_t size() const { return fa_scale.size(); }
    void validate() const;
};

// Discretization of the ensemble: P slice positions x Q intra-voxel dephasing
// states. State k accumulates (k + 0.5) * 2*pi / Q of extra phase per TR, which
// models the unbalanced spoiler gradient.
struct SimGrid {
    std::size_t n_profile = 21;
    std::size_t n_dephase = 50;

    void validate() const {
        if (n_profile < 1) throw ConfigError("profile needs at least one position");
        if (n_dephase < 1) throw ConfigError("dephasing needs at least one state");
    }
};

// Rotation by alpha about the transverse axis at azimuth phase. With phase 0
// the axis is +x and a positive alpha takes +z toward +y (so alpha=90 maps
// (0,0,1) to (0,1,0)). Norm-preserving.
IsochromatState rf_rotate(const IsochromatState& state, double alpha_deg, double phase_deg);

// Closed-form relaxation over dt: transverse decay by exp(-dt/T2), longitudinal
// recovery toward 1 with rate 1/T1.
IsochromatState relax(const IsochromatState& state, double dt_ms, const TissueParams& tissue);

// Rotate the transverse components about z by phi radians.
IsochromatState dephase(const IsochromatState& state, double phi_rad);

// Slice profile sampled from the Fourier magnitude of a Hann-windowed
// three-lobe sinc pulse at n_positions points across the nominal slice,
// rescaled so the largest sample is 1.
SliceProfile default_slice_profile(std::size_t n_positions);
SliceProfile load_slice_profile_csv(const std::string& path);
void save_slice_profile_csv(const SliceProfile& profile, const std::string& path);

// Flip-angle train of smooth half-sine lobes clipped to [5, 70] degrees and a
// seeded smooth TR series rescaled to span exactly [12.07, 14.73] ms.
SequenceParams default_sequence(std::size_t n_frames, std::uint64_t seed);

// Sequence CSV: header "flip_angle_deg,tr_ms", one row per frame. TE/TI and the
// inversion switch live in the run config, not the file.
SequenceParams load_sequence_csv(const std::string& path);
void save_sequence_csv(const SequenceParams& seq, const std::string& path);

// One fingerprint: every isochromat starts at (0,0,1), is optionally inverted
// and recovers over TI, then per frame is excited with the profile-scaled flip
// angle, relaxes to TE where the transverse value is recorded, relaxes over
// TR-TE, and picks up its per-TR spoiling phase. The complex ensemble mean per
// frame is rotated by the negative phase of its largest-magnitude sample and
// the real part is returned.
std::vector<double> simulate_fingerprint(const TissueParams& tissue, const SequenceParams& seq,
                                         const SliceProfile& profile, const SimGrid& grid);

// Column j is simulate_fingerprint(params[j], ...). Atoms fan out across
// threads; per-atom arithmetic is identical in serial and parallel runs.
// Output is un-normalized. Wall-clock seconds are reported via elapsed_seconds.
Dictionary simulate_dictionary(const std::vector<TissueParams>& params, const SequenceParams& seq,
                               const SliceProfile& profile, const SimGrid& grid,
                               unsigned n_threads = 0, double* elapsed_seconds = nullptr);

} // namespace ganmrf
