#pragma once

#include <string>
#include <vector>

#include "ganmrf/types.hpp"

namespace ganmrf {

// Values generated by one segment list: every start + k*step with both
// endpoints inclusive, segments concatenated in order.
std::vector<double> segment_values(const std::vector<GridSegment>& segments,
                                   const std::string& label);

// Cartesian product of the T1 and T2 value lists, filtered to t2 <= t1,
// ordered lexicographically by (t1, t2).
std::vector<TissueParams> expand_grid(const GridSpec& spec);

// Grid spec JSON: {"t1_segments":[{"start":..,"end":..,"step":..},...],
//                  "t2_segments":[...]}  (all in ms)
GridSpec load_grid_spec(const std::string& path);
GridSpec parse_grid_spec(const std::string& json_text);
void save_grid_spec(const GridSpec& spec, const std::string& path);

// Built-in grids: the standard FISP dictionary (5970 combinations) and the
// coarse (297) / fine (106160) scalability-study grids.
GridSpec standard_grid_spec();
GridSpec coarse_grid_spec();
GridSpec fine_grid_spec();

} // namespace ganmrf
