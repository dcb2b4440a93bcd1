#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flarecast/mvts.hpp"

namespace flarecast {

using FeatureVector = std::vector<double>;

struct IForestConfig {
  int n_trees = 100;
  int subsample_size = 256;  // capped at the dataset size
  double contamination = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Flat-array binary tree. Internal nodes split on feature/threshold;
/// external nodes keep the count of training points that reached them.
struct IsolationTree {
  struct Node {
    int feature = -1;  // -1 marks an external node
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;
  };
  std::vector<Node> nodes;
};

struct IsolationForestModel {
  std::vector<IsolationTree> trees;
  std::size_t sample_size = 0;  // effective psi after capping
  std::size_t dimension = 0;
  double c_norm = 0.0;  // avg_path_c(sample_size)
  IForestConfig config;
};

/// Row-major concatenation of the parameter rows.
FeatureVector flatten(const MvtsInstance& inst);

/// Expected unsuccessful-search path length c(n) = 2H(n-1) - 2(n-1)/n,
/// with H computed by direct summation. c(0) = c(1) = 0.
double avg_path_c(std::size_t n);

IsolationForestModel fit_iforest(const std::vector<FeatureVector>& vectors,
                                 const IForestConfig& cfg, int threads = 1);

/// Edges from the root to the external node plus the c(size) adjustment.
double path_length(const IsolationTree& tree, std::span<const double> x);

/// Anomaly score 2^(-E[h]/c(psi)), strictly inside (0,1).
double score(const IsolationForestModel& model, std::span<const double> x);

/// Ids of the floor(r*n) highest-scoring instances. Ties at the cut break
/// by ascending instance_id so flag sets are nested across rates.
std::set<std::string> flag_outliers(
    const std::vector<std::pair<std::string, double>>& scores, double contamination);

/// Debug dump of trees, config and seed. Not a stability-guaranteed format.
std::string iforest_to_json(const IsolationForestModel& model);

}  // namespace flarecast
