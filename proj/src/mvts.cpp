#include "flarecast/mvts.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "flarecast/hash.hpp"

namespace flarecast {

int class_strength(FlareClass c) {
  switch (c) {
    case FlareClass::X: return 4;
    case FlareClass::M: return 3;
    case FlareClass::C: return 2;
    case FlareClass::B: return 1;
    case FlareClass::N: return 0;
  }
  throw ComputeError("unknown FlareClass");
}

char class_code(FlareClass c) {
  switch (c) {
    case FlareClass::X: return 'X';
    case FlareClass::M: return 'M';
    case FlareClass::C: return 'C';
    case FlareClass::B: return 'B';
    case FlareClass::N: return 'N';
  }
  throw ComputeError("unknown FlareClass");
}

bool stronger_than(FlareClass a, FlareClass b) {
  return class_strength(a) > class_strength(b);
}

FlareClass parse_flare_class(std::string_view text) {
  if (text.size() == 1) {
    switch (text.front()) {
      case 'X': return FlareClass::X;
      case 'M': return FlareClass::M;
      case 'C': return FlareClass::C;
      case 'B': return FlareClass::B;
      case 'N': return FlareClass::N;
      case 'A': return FlareClass::N;  // A-class reports count as flare-quiet
      default: break;
    }
  }
  throw ConfigError("unparsable flare class label: '" + std::string(text) + "'");
}

BinaryTask BinaryTask::x_vs_n() {
  return {TaskKind::x_vs_n, {FlareClass::X}, {FlareClass::N}};
}

BinaryTask BinaryTask::xm_vs_cbn() {
  return {TaskKind::xm_vs_cbn,
          {FlareClass::X, FlareClass::M},
          {FlareClass::C, FlareClass::B, FlareClass::N}};
}

BinaryTask BinaryTask::from_name(std::string_view name) {
  if (name == "X_VS_N") return x_vs_n();
  if (name == "XM_VS_CBN") return xm_vs_cbn();
  throw ConfigError("unknown task name: '" + std::string(name) +
                    "' (expected X_VS_N or XM_VS_CBN)");
}

std::string_view BinaryTask::name() const {
  return kind == TaskKind::x_vs_n ? "X_VS_N" : "XM_VS_CBN";
}

bool BinaryTask::is_positive(FlareClass c) const {
  return std::find(positives.begin(), positives.end(), c) != positives.end();
}

bool BinaryTask::is_negative(FlareClass c) const {
  return std::find(negatives.begin(), negatives.end(), c) != negatives.end();
}

BinaryLabel classify_binary(FlareClass c, const BinaryTask& task) {
  if (task.is_positive(c)) return BinaryLabel::positive;
  if (task.is_negative(c)) return BinaryLabel::negative;
  throw TaskUniverseError(std::string("instance not in task universe: class ") +
                          class_code(c) + " under " + std::string(task.name()));
}

BinaryLabel instance_label(const MvtsInstance& inst, const BinaryTask& task) {
  return classify_binary(inst.flare_class, task);
}

Dataset::Dataset(std::vector<MvtsInstance> instances) : instances_(std::move(instances)) {
  if (instances_.empty()) return;
  const auto& names = instances_.front().param_names;
  const std::size_t t = instances_.front().values.cols();
  std::unordered_set<std::string> ids;
  ids.reserve(instances_.size());
  for (const auto& inst : instances_) {
    if (inst.param_names != names)
      throw ConfigError("dataset instances disagree on parameter names (instance '" +
                        inst.instance_id + "')");
    if (inst.values.rows() != names.size() || inst.values.cols() != t)
      throw ConfigError("dataset instances disagree on P or T (instance '" +
                        inst.instance_id + "')");
    if (!ids.insert(inst.instance_id).second)
      throw ConfigError("duplicate instance_id in dataset: '" + inst.instance_id + "'");
  }
  std::set<std::string> unique_names(names.begin(), names.end());
  if (unique_names.size() != names.size())
    throw ConfigError("duplicate parameter names in dataset");
}

const std::vector<std::string>& Dataset::param_names() const {
  static const std::vector<std::string> empty;
  return instances_.empty() ? empty : instances_.front().param_names;
}

std::size_t Dataset::n_params() const {
  return instances_.empty() ? 0 : instances_.front().values.rows();
}

std::size_t Dataset::n_timesteps() const {
  return instances_.empty() ? 0 : instances_.front().values.cols();
}

Dataset filter_task(const Dataset& d, const BinaryTask& task) {
  std::vector<MvtsInstance> kept;
  for (const auto& inst : d.instances())
    if (task.in_universe(inst.flare_class)) kept.push_back(inst);
  return Dataset(std::move(kept));
}

Dataset select_parameters(const Dataset& d, const std::vector<std::string>& names) {
  const auto& have = d.param_names();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < have.size(); ++i) index.emplace(have[i], i);

  std::vector<std::size_t> rows;
  std::vector<std::string> missing;
  for (const auto& name : names) {
    const auto it = index.find(name);
    if (it == index.end())
      missing.push_back(name);
    else
      rows.push_back(it->second);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "unknown parameter name(s):";
    for (const auto& name : missing) msg << " '" << name << "'";
    throw ConfigError(msg.str());
  }

  std::vector<MvtsInstance> out;
  out.reserve(d.size());
  for (const auto& inst : d.instances()) {
    MvtsInstance picked;
    picked.instance_id = inst.instance_id;
    picked.flare_class = inst.flare_class;
    picked.partition_id = inst.partition_id;
    picked.param_names = names;
    picked.values = Matrix(rows.size(), inst.values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < inst.values.cols(); ++c)
        picked.values(r, c) = inst.values(rows[r], c);
    out.push_back(std::move(picked));
  }
  return Dataset(std::move(out));
}

std::size_t count_label(const Dataset& d, const BinaryTask& task, BinaryLabel label) {
  std::size_t n = 0;
  for (const auto& inst : d.instances())
    if (task.in_universe(inst.flare_class) &&
        classify_binary(inst.flare_class, task) == label)
      ++n;
  return n;
}

double imbalance_ratio(const Dataset& d, const BinaryTask& task) {
  const std::size_t pos = count_label(d, task, BinaryLabel::positive);
  const std::size_t neg = count_label(d, task, BinaryLabel::negative);
  if (pos == 0) throw ComputeError("undefined imbalance ratio: zero positive instances");
  return static_cast<double>(neg) / static_cast<double>(pos);
}

std::string imbalance_ratio_string(double ratio) {
  const long long k = static_cast<long long>(std::floor(ratio + 0.5));
  return "1:" + std::to_string(k);
}

std::map<FlareClass, std::size_t> class_counts(const Dataset& d) {
  std::map<FlareClass, std::size_t> counts;
  for (const auto& inst : d.instances()) ++counts[inst.flare_class];
  return counts;
}

Dataset slice_partition(const Dataset& d, int partition_id) {
  std::vector<MvtsInstance> kept;
  for (const auto& inst : d.instances())
    if (inst.partition_id == partition_id) kept.push_back(inst);
  return Dataset(std::move(kept));
}

Dataset with_partition(const Dataset& d, int partition_id) {
  std::vector<MvtsInstance> out = d.instances();
  for (auto& inst : out) inst.partition_id = partition_id;
  return Dataset(std::move(out));
}

Dataset merge(const std::vector<Dataset>& parts) {
  std::vector<MvtsInstance> all;
  for (const auto& part : parts)
    all.insert(all.end(), part.instances().begin(), part.instances().end());
  return Dataset(std::move(all));
}

std::vector<int> partition_ids(const Dataset& d) {
  std::set<int> ids;
  for (const auto& inst : d.instances()) ids.insert(inst.partition_id);
  return {ids.begin(), ids.end()};
}

std::string dataset_fingerprint_parts(std::size_t n_timesteps,
                                      const std::vector<std::string>& param_names,
                                      const std::vector<std::string>& instance_ids) {
  Fnv1a h;
  h.update(std::uint64_t{instance_ids.size()});
  h.update(std::uint64_t{n_timesteps});
  for (const auto& name : param_names) h.update(name).update("\x1f");
  for (const auto& id : instance_ids) h.update(id).update("\x1e");
  return h.hex();
}

std::string dataset_fingerprint(const Dataset& d) {
  std::vector<std::string> ids;
  ids.reserve(d.size());
  for (const auto& inst : d.instances()) ids.push_back(inst.instance_id);
  return dataset_fingerprint_parts(d.n_timesteps(), d.param_names(), ids);
}

}  // namespace flarecast
