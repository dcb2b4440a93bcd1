#include "flarecast/preprocess.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

#include "flarecast/rng.hpp"

namespace flarecast {

namespace {

// Uniform k-subset of the given index pool, returned as a retained-id set.
void pick_into(std::unordered_set<std::size_t>& retained,
               const std::vector<std::size_t>& pool, std::size_t k,
               rng::Engine& eng) {
  const auto chosen = rng::sample_without_replacement(eng, pool.size(), k);
  for (const std::size_t c : chosen) retained.insert(pool[c]);
}

Dataset keep_indices(const Dataset& d, const std::unordered_set<std::size_t>& retained) {
  std::vector<MvtsInstance> out;
  out.reserve(retained.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (retained.count(i)) out.push_back(d.instances()[i]);
  return Dataset(std::move(out));
}

}  // namespace

NormalizationStats fit_minmax(const Dataset& d) {
  if (d.empty()) throw ComputeError("fit_minmax: empty dataset");
  NormalizationStats stats;
  stats.param_names = d.param_names();
  stats.fitted_on = dataset_fingerprint(d);
  const std::size_t p = d.n_params();
  stats.min_values.assign(p, std::numeric_limits<double>::infinity());
  stats.max_values.assign(p, -std::numeric_limits<double>::infinity());
  for (const auto& inst : d.instances()) {
    for (std::size_t r = 0; r < p; ++r) {
      for (const double v : inst.values.row(r)) {
        stats.min_values[r] = std::min(stats.min_values[r], v);
        stats.max_values[r] = std::max(stats.max_values[r], v);
      }
    }
  }
  return stats;
}

Dataset apply_minmax(const Dataset& d, const NormalizationStats& stats) {
  if (d.empty()) return d;
  if (d.param_names() != stats.param_names)
    throw ConfigError("apply_minmax: parameter names do not match fitted stats");
  std::vector<MvtsInstance> out = d.instances();
  const std::size_t p = stats.param_names.size();
  for (auto& inst : out) {
    for (std::size_t r = 0; r < p; ++r) {
      const double lo = stats.min_values[r];
      const double range = stats.max_values[r] - lo;
      for (double& v : inst.values.row(r)) v = range > 0.0 ? (v - lo) / range : 0.0;
    }
  }
  return Dataset(std::move(out));
}

std::size_t SamplePlan::total_target() const {
  std::size_t sum = 0;
  for (const auto& e : entries) sum += e.target;
  return sum;
}

std::vector<std::size_t> largest_remainder_targets(
    std::size_t total, const std::vector<std::pair<FlareClass, std::size_t>>& populations) {
  std::vector<std::size_t> targets(populations.size(), 0);
  std::size_t grand_total = 0;
  for (const auto& [c, n] : populations) grand_total += n;
  if (total == 0) return targets;
  if (total > grand_total)
    throw ComputeError("apportionment target " + std::to_string(total) +
                       " exceeds the available population " + std::to_string(grand_total));

  // Floors first, then one extra seat per largest remainder; ties go to the
  // larger population, then to the lexicographically smaller subclass code.
  struct Quota {
    std::size_t index;
    std::uint64_t remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < populations.size(); ++i) {
    const std::uint64_t num =
        static_cast<std::uint64_t>(total) * populations[i].second;
    targets[i] = static_cast<std::size_t>(num / grand_total);
    assigned += targets[i];
    quotas.push_back({i, num % grand_total});
  }
  std::sort(quotas.begin(), quotas.end(), [&](const Quota& a, const Quota& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    const auto& pa = populations[a.index];
    const auto& pb = populations[b.index];
    if (pa.second != pb.second) return pa.second > pb.second;
    return class_code(pa.first) < class_code(pb.first);
  });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned)
    ++targets[quotas[i].index];

  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i] > populations[i].second)
      throw ComputeError("apportionment target exceeds subclass population");
  return targets;
}

SamplePlan plan_climatology(const Dataset& d, const BinaryTask& task) {
  SamplePlan plan;
  plan.positive_count = count_label(d, task, BinaryLabel::positive);

  std::vector<std::pair<FlareClass, std::size_t>> populations;
  for (const FlareClass c : task.negatives) {
    std::size_t n = 0;
    for (const auto& inst : d.instances())
      if (inst.flare_class == c) ++n;
    if (n > 0) populations.emplace_back(c, n);
  }

  std::size_t total_neg = 0;
  for (const auto& [c, n] : populations) total_neg += n;
  if (plan.positive_count > total_neg)
    throw ComputeError("undersampling direction violated: " +
                       std::to_string(plan.positive_count) + " positives vs " +
                       std::to_string(total_neg) + " negatives");

  const auto targets = largest_remainder_targets(plan.positive_count, populations);
  for (std::size_t i = 0; i < populations.size(); ++i)
    plan.entries.push_back({populations[i].first, populations[i].second, targets[i]});
  return plan;
}

Dataset undersample_random(const Dataset& d, const BinaryTask& task,
                           std::uint64_t seed) {
  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const FlareClass c = d.instances()[i].flare_class;
    if (task.is_positive(c))
      positives.push_back(i);
    else if (task.is_negative(c))
      negatives.push_back(i);
  }
  if (positives.size() > negatives.size())
    throw ComputeError("undersampling direction violated: " +
                       std::to_string(positives.size()) + " positives vs " +
                       std::to_string(negatives.size()) + " negatives");

  std::unordered_set<std::size_t> retained(positives.begin(), positives.end());
  rng::Engine eng(rng::combine(seed, 0x72616e646f6dULL));  // "random"
  pick_into(retained, negatives, positives.size(), eng);
  return keep_indices(d, retained);
}

Dataset undersample_climatology(const Dataset& d, const BinaryTask& task,
                                std::uint64_t seed) {
  const SamplePlan plan = plan_climatology(d, task);

  std::unordered_set<std::size_t> retained;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (task.is_positive(d.instances()[i].flare_class)) retained.insert(i);

  for (const auto& entry : plan.entries) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.instances()[i].flare_class == entry.subclass) pool.push_back(i);
    rng::Engine eng(
        rng::combine(seed, static_cast<std::uint64_t>(class_code(entry.subclass))));
    pick_into(retained, pool, entry.target, eng);
  }
  return keep_indices(d, retained);
}

Dataset stratified_cap(const Dataset& d, std::size_t max_instances,
                       std::uint64_t seed) {
  if (d.size() <= max_instances) return d;

  const auto counts = class_counts(d);
  struct Share {
    FlareClass c;
    std::size_t population;
    std::size_t target;
    std::uint64_t remainder;
  };
  std::vector<Share> shares;
  for (const auto& [c, n] : counts) shares.push_back({c, n, 0, 0});

  std::size_t assigned = 0;
  for (auto& s : shares) {
    const std::uint64_t num = static_cast<std::uint64_t>(max_instances) * s.population;
    s.target = static_cast<std::size_t>(num / d.size());
    s.remainder = num % d.size();
    assigned += s.target;
  }
  std::sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return class_code(a.c) < class_code(b.c);
  });
  for (std::size_t i = 0; assigned < max_instances && i < shares.size(); ++i, ++assigned)
    ++shares[i].target;

  // Rare classes must survive the cap: bump zero targets, stealing from the
  // largest share.
  for (auto& s : shares) {
    if (s.target == 0) {
      auto largest = std::max_element(
          shares.begin(), shares.end(),
          [](const Share& a, const Share& b) { return a.target < b.target; });
      if (largest->target > 1) {
        --largest->target;
        s.target = 1;
      }
    }
  }

  std::unordered_set<std::size_t> retained;
  for (const auto& s : shares) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.instances()[i].flare_class == s.c) pool.push_back(i);
    rng::Engine eng(rng::combine(seed, static_cast<std::uint64_t>(class_code(s.c))));
    pick_into(retained, pool, s.target, eng);
  }
  return keep_indices(d, retained);
}

}  // namespace flarecast
