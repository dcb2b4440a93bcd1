#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flarecast/mvts.hpp"

namespace flarecast {

/// Per-parameter min/max pooled over all instances and timesteps, stamped
/// with the fingerprint of the dataset they were fitted on.
struct NormalizationStats {
  std::vector<std::string> param_names;
  std::vector<double> min_values;
  std::vector<double> max_values;
  std::string fitted_on;
};

NormalizationStats fit_minmax(const Dataset& d);

/// v -> (v - min)/(max - min) per parameter. A degenerate parameter
/// (max == min) maps to 0.0. Values outside the fitted range are not
/// clipped, so test data may land outside [0,1].
Dataset apply_minmax(const Dataset& d, const NormalizationStats& stats);

/// Undersampling target per negative subclass; targets sum to the positive
/// count exactly (largest-remainder apportionment over subclass populations).
struct SamplePlan {
  struct Entry {
    FlareClass subclass;
    std::size_t population = 0;
    std::size_t target = 0;
  };
  std::vector<Entry> entries;
  std::size_t positive_count = 0;

  std::size_t total_target() const;
};

SamplePlan plan_climatology(const Dataset& d, const BinaryTask& task);

/// Largest-remainder apportionment of `total` across subclass populations,
/// in exact integer arithmetic. Remainder ties prefer the larger population,
/// then the smaller class code. Targets sum to `total` exactly and never
/// exceed their population when total <= sum of populations.
std::vector<std::size_t> largest_remainder_targets(
    std::size_t total, const std::vector<std::pair<FlareClass, std::size_t>>& populations);

/// Keeps every positive plus a seeded uniform subset of negatives of equal
/// size. Input order is preserved.
Dataset undersample_random(const Dataset& d, const BinaryTask& task, std::uint64_t seed);

/// Keeps every positive plus per-subclass seeded uniform subsets following
/// plan_climatology, preserving the majority's class mix at a 1:1 ratio.
Dataset undersample_climatology(const Dataset& d, const BinaryTask& task,
                                std::uint64_t seed);

/// Seeded class-stratified cap to at most `max_instances`, used to shrink
/// partitions for smoke runs. Every present class keeps at least one
/// instance when the cap allows.
Dataset stratified_cap(const Dataset& d, std::size_t max_instances, std::uint64_t seed);

}  // namespace flarecast
