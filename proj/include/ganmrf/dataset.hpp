#pragma once

#include <array>
#include <cstdint>

#include "ganmrf/types.hpp"

namespace ganmrf {

// Seeded uniform shuffle of the column indices, partitioned by the fractions
// with largest-remainder rounding (remainder ties go to the earlier part).
DatasetSplit split_dataset(const Dictionary& dict, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

// Scale every column to unit Euclidean norm. Idempotent.
Dictionary normalize_atoms(const Dictionary& dict);

// Rescale a normalized set so entries fill [-0.9, 0.9]; the factor is stored
// in train_scale so synthesis can invert it.
Dictionary scale_for_training(const Dictionary& dict, double* scale_out = nullptr);

// New dictionary holding the selected columns (and their params) in order.
Dictionary select_atoms(const Dictionary& dict, const std::vector<std::size_t>& idx);

} // namespace ganmrf
