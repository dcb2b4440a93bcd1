#include "flarecast/iforest.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flarecast/rng.hpp"
#include "flarecast/threading.hpp"

namespace flarecast {

namespace {

struct TreeBuilder {
  const std::vector<FeatureVector>& data;
  std::size_t dimension;
  int height_limit;
  rng::Engine& eng;
  IsolationTree tree;

  // Grows the subtree over data[indices[lo..hi)] and returns its node index.
  int grow(std::vector<std::size_t>& indices, std::size_t lo, std::size_t hi,
           int depth) {
    const std::size_t count = hi - lo;
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_index].size = static_cast<int>(count);

    if (count <= 1 || depth >= height_limit) return node_index;

    // Candidate features are those with a usable open interval between the
    // node's min and max.
    std::vector<int> candidates;
    std::vector<std::pair<double, double>> ranges(dimension);
    for (std::size_t f = 0; f < dimension; ++f) {
      double lo_v = data[indices[lo]][f];
      double hi_v = lo_v;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        const double v = data[indices[i]][f];
        lo_v = std::min(lo_v, v);
        hi_v = std::max(hi_v, v);
      }
      ranges[f] = {lo_v, hi_v};
      if (std::nextafter(lo_v, std::numeric_limits<double>::infinity()) < hi_v)
        candidates.push_back(static_cast<int>(f));
    }
    if (candidates.empty()) return node_index;

    const int feature =
        candidates[static_cast<std::size_t>(rng::below(eng, candidates.size()))];
    const auto [min_v, max_v] = ranges[static_cast<std::size_t>(feature)];
    double split = min_v + rng::uniform_open01(eng) * (max_v - min_v);
    if (!(split > min_v && split < max_v))
      split = min_v + 0.5 * (max_v - min_v);  // fp rounding fallback

    auto mid_it = std::partition(
        indices.begin() + static_cast<std::ptrdiff_t>(lo),
        indices.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](std::size_t i) { return data[i][static_cast<std::size_t>(feature)] < split; });
    const std::size_t mid = static_cast<std::size_t>(mid_it - indices.begin());

    tree.nodes[node_index].feature = feature;
    tree.nodes[node_index].threshold = split;
    const int left = grow(indices, lo, mid, depth + 1);
    tree.nodes[node_index].left = left;
    const int right = grow(indices, mid, hi, depth + 1);
    tree.nodes[node_index].right = right;
    return node_index;
  }
};

}  // namespace

void IForestConfig::validate() const {
  if (n_trees < 1) throw ConfigError("iforest: n_trees must be >= 1");
  if (subsample_size < 2) throw ConfigError("iforest: subsample_size must be >= 2");
  if (!(contamination >= 0.0 && contamination <= 0.5))
    throw ConfigError("iforest: contamination must lie in [0, 0.5]");
}

FeatureVector flatten(const MvtsInstance& inst) { return inst.values.data(); }

double avg_path_c(std::size_t n) {
  if (n <= 1) return 0.0;
  double harmonic = 0.0;
  for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
  return 2.0 * harmonic - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

IsolationForestModel fit_iforest(const std::vector<FeatureVector>& vectors,
                                 const IForestConfig& cfg, int threads) {
  cfg.validate();
  if (vectors.size() < 2) throw ComputeError("iforest: need at least 2 vectors");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim) throw ComputeError("iforest: inconsistent vector dimensions");

  IsolationForestModel model;
  model.config = cfg;
  model.dimension = dim;
  model.sample_size =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.subsample_size), vectors.size());
  model.c_norm = avg_path_c(model.sample_size);
  const int height_limit = static_cast<int>(
      std::ceil(std::log2(static_cast<double>(model.sample_size))));

  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  // Each tree draws from an independent generator, so building in parallel
  // gives the same forest as building serially.
  parallel_for(static_cast<std::size_t>(cfg.n_trees), threads, [&](std::size_t t) {
    rng::Engine eng(cfg.seed ^ static_cast<std::uint64_t>(t));
    auto indices = rng::sample_without_replacement(eng, vectors.size(), model.sample_size);
    TreeBuilder builder{vectors, dim, height_limit, eng, {}};
    builder.grow(indices, 0, indices.size(), 0);
    model.trees[t] = std::move(builder.tree);
  });
  return model;
}

double path_length(const IsolationTree& tree, std::span<const double> x) {
  int node = 0;
  int depth = 0;
  for (;;) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0)
      return static_cast<double>(depth) +
             avg_path_c(static_cast<std::size_t>(n.size));
    if (static_cast<std::size_t>(n.feature) >= x.size())
      throw ComputeError("path_length: vector dimension mismatch");
    node = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    ++depth;
  }
}

double score(const IsolationForestModel& model, std::span<const double> x) {
  if (x.size() != model.dimension)
    throw ComputeError("score: vector dimension mismatch");
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += path_length(tree, x);
  const double mean_path = sum / static_cast<double>(model.trees.size());
  return std::exp2(-mean_path / model.c_norm);
}

std::set<std::string> flag_outliers(
    const std::vector<std::pair<std::string, double>>& scores, double contamination) {
  if (!(contamination >= 0.0 && contamination <= 0.5))
    throw ConfigError("flag_outliers: contamination must lie in [0, 0.5]");
  const std::size_t k = static_cast<std::size_t>(
      std::floor(contamination * static_cast<double>(scores.size())));
  std::vector<std::pair<std::string, double>> order = scores;
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> flagged;
  for (std::size_t i = 0; i < k; ++i) flagged.insert(order[i].first);
  return flagged;
}

std::string iforest_to_json(const IsolationForestModel& model) {
  nlohmann::json doc;
  doc["n_trees"] = model.config.n_trees;
  doc["subsample_size"] = model.config.subsample_size;
  doc["contamination"] = model.config.contamination;
  doc["seed"] = model.config.seed;
  doc["sample_size"] = model.sample_size;
  doc["dimension"] = model.dimension;
  doc["c_norm"] = model.c_norm;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"size", n.size}});
    trees.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees);
  return doc.dump();
}

}  // namespace flarecast
