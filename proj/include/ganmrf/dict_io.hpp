#pragma once

#include <string>

#include "ganmrf/types.hpp"

namespace ganmrf {

// MRFD binary layout (little-endian):
//   magic "MRFD" | version u32 | n_frames u32 | n_atoms u32 | flags u32
//   t1_ms f64[n_atoms] | t2_ms f64[n_atoms] | atoms f64[n_frames*n_atoms] column-major
// flags bit 0: columns are unit-norm.
void save_dictionary(const Dictionary& dict, const std::string& path);
Dictionary load_dictionary(const std::string& path);

// CSV export: header "t1_ms,t2_ms,frame_0,...,frame_{n-1}", one row per atom.
void export_dictionary_csv(const Dictionary& dict, const std::string& path);

} // namespace ganmrf
