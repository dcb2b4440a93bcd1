#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flarecast/error.hpp"
#include "flarecast/matrix.hpp"

namespace flarecast {

/// GOES flare magnitude classes, strongest first. A-class reports are folded
/// into N at ingestion, so N covers everything below B.
enum class FlareClass { X, M, C, B, N };

inline constexpr std::array<FlareClass, 5> kFlareClasses = {
    FlareClass::X, FlareClass::M, FlareClass::C, FlareClass::B, FlareClass::N};

/// X=4 down to N=0; defines the total order X > M > C > B > N.
int class_strength(FlareClass c);
char class_code(FlareClass c);
bool stronger_than(FlareClass a, FlareClass b);

/// Parses "X","M","C","B","N"; "A" maps to N. Anything else is a ConfigError.
FlareClass parse_flare_class(std::string_view text);

enum class TaskKind { x_vs_n, xm_vs_cbn };

/// A dichotomy over flare classes. X_VS_N keeps only the two extremes;
/// XM_VS_CBN covers all five classes.
struct BinaryTask {
  TaskKind kind;
  std::vector<FlareClass> positives;
  std::vector<FlareClass> negatives;

  static BinaryTask x_vs_n();
  static BinaryTask xm_vs_cbn();
  static BinaryTask from_name(std::string_view name);  // "X_VS_N" / "XM_VS_CBN"
  std::string_view name() const;

  bool is_positive(FlareClass c) const;
  bool is_negative(FlareClass c) const;
  bool in_universe(FlareClass c) const { return is_positive(c) || is_negative(c); }
};

enum class BinaryLabel { negative, positive };

inline int label_sign(BinaryLabel l) { return l == BinaryLabel::positive ? +1 : -1; }

/// Membership-based label; throws TaskUniverseError for classes the task
/// does not cover so callers filter instead of mislabeling.
BinaryLabel classify_binary(FlareClass c, const BinaryTask& task);

/// One labeled observation window: P parameter rows by T timestep columns.
struct MvtsInstance {
  std::string instance_id;
  FlareClass flare_class = FlareClass::N;
  int partition_id = 1;
  std::vector<std::string> param_names;
  Matrix values;  // P x T

  bool operator==(const MvtsInstance&) const = default;
};

/// Immutable collection of instances sharing parameter names and T.
/// Construction validates shape agreement and id uniqueness.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<MvtsInstance> instances);

  const std::vector<MvtsInstance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  const std::vector<std::string>& param_names() const;
  std::size_t n_params() const;
  std::size_t n_timesteps() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<MvtsInstance> instances_;
};

BinaryLabel instance_label(const MvtsInstance& inst, const BinaryTask& task);

/// Instances whose class lies in the task universe, original order kept.
Dataset filter_task(const Dataset& d, const BinaryTask& task);

/// New dataset keeping only the named parameter rows, in the given order.
/// Unknown names raise a ConfigError listing every missing name.
Dataset select_parameters(const Dataset& d, const std::vector<std::string>& names);

/// Negatives per positive; requires at least one positive.
double imbalance_ratio(const Dataset& d, const BinaryTask& task);

/// "1:k" rendering with k rounded half up, as tabulated in survey papers.
std::string imbalance_ratio_string(double ratio);

std::map<FlareClass, std::size_t> class_counts(const Dataset& d);
std::size_t count_label(const Dataset& d, const BinaryTask& task, BinaryLabel label);

/// Instances of one partition, order kept.
Dataset slice_partition(const Dataset& d, int partition_id);

/// Same instances relabeled with a new partition id.
Dataset with_partition(const Dataset& d, int partition_id);

/// Concatenation; shape agreement and id uniqueness revalidated.
Dataset merge(const std::vector<Dataset>& parts);

std::vector<int> partition_ids(const Dataset& d);

/// Stable hex digest over ids, parameter names and T; independent of the
/// process and platform, used to stamp fitted statistics.
std::string dataset_fingerprint(const Dataset& d);

/// Same digest computed from the raw parts, so audits can recheck a stamp
/// without the underlying values.
std::string dataset_fingerprint_parts(std::size_t n_timesteps,
                                      const std::vector<std::string>& param_names,
                                      const std::vector<std::string>& instance_ids);

}  // namespace flarecast
