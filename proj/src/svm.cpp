#include "flarecast/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "flarecast/error.hpp"
#include "flarecast/rng.hpp"

namespace flarecast {

void SvmConfig::validate() const {
  if (!(C > 0.0)) throw ConfigError("svm C must be > 0");
  if (!(kkt_tol > 0.0)) throw ConfigError("svm kkt_tol must be > 0");
  if (max_passes <= 0) throw ConfigError("svm max_passes must be > 0");
}

double min_eigenvalue(const GramMatrix& g) {
  if (g.rows != g.cols) throw ComputeError("min_eigenvalue requires a square gram");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < g.cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(i, j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ComputeError("eigenvalue computation failed on gram matrix");
  }
  return solver.eigenvalues().minCoeff();
}

double compute_diag_shift(const GramMatrix& g) {
  return std::max(0.0, -min_eigenvalue(g)) + 1e-10;
}

namespace {

void check_training_inputs(const GramMatrix& gram, const std::vector<int>& labels) {
  if (gram.rows != gram.cols) throw ConfigError("training gram must be square");
  if (gram.rows == 0) throw ConfigError("training gram is empty");
  if (labels.size() != gram.rows) {
    throw ConfigError("label count " + std::to_string(labels.size()) +
                      " does not match gram size " + std::to_string(gram.rows));
  }
  bool has_pos = false;
  bool has_neg = false;
  for (int y : labels) {
    if (y == 1) {
      has_pos = true;
    } else if (y == -1) {
      has_neg = true;
    } else {
      throw ConfigError("svm labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) throw ConfigError("svm training requires both classes");
  for (std::size_t i = 0; i < gram.rows; ++i) {
    for (std::size_t j = i + 1; j < gram.cols; ++j) {
      if (std::abs(gram(i, j) - gram(j, i)) > 1e-9) {
        throw ConfigError("training gram is not symmetric");
      }
    }
  }
}

// Resolves exact ties among argmax/argmin candidates with a seeded draw so
// training stays deterministic for a fixed config.
std::size_t pick_tied(const std::vector<std::size_t>& candidates, rng::Engine& eng) {
  if (candidates.size() == 1) return candidates[0];
  return candidates[rng::below(eng, candidates.size())];
}

}  // namespace

SvmModel train_svm(const GramMatrix& gram, const std::vector<int>& labels,
                   const SvmConfig& cfg, double diag_shift) {
  cfg.validate();
  check_training_inputs(gram, labels);

  const std::size_t n = gram.rows;
  const double C = cfg.C;
  const auto kernel = [&](std::size_t i, std::size_t j) {
    return gram(i, j) + (i == j ? diag_shift : 0.0);
  };

  std::vector<double> alpha(n, 0.0);
  // ftilde[k] = sum_j alpha_j y_j K(k, j); decision without bias.
  std::vector<double> ftilde(n, 0.0);
  rng::Engine tie_eng(rng::mix64(cfg.seed ^ 0x73766d2d74696573ull));

  const std::uint64_t budget =
      static_cast<std::uint64_t>(cfg.max_passes) * static_cast<std::uint64_t>(n);
  double residual = std::numeric_limits<double>::infinity();
  std::uint64_t stalled = 0;

  std::vector<std::size_t> up_ties;
  std::vector<std::size_t> low_ties;

  for (std::uint64_t iter = 0;; ++iter) {
    // g_k = y_k - ftilde[k]. The maximal violating pair maximizes g over the
    // up set and minimizes it over the low set.
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    up_ties.clear();
    low_ties.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = static_cast<double>(labels[k]) - ftilde[k];
      const bool in_up = labels[k] == 1 ? alpha[k] < C : alpha[k] > 0.0;
      const bool in_low = labels[k] == 1 ? alpha[k] > 0.0 : alpha[k] < C;
      if (in_up) {
        if (gk > up_best) {
          up_best = gk;
          up_ties.assign(1, k);
        } else if (gk == up_best) {
          up_ties.push_back(k);
        }
      }
      if (in_low) {
        if (gk < low_best) {
          low_best = gk;
          low_ties.assign(1, k);
        } else if (gk == low_best) {
          low_ties.push_back(k);
        }
      }
    }

    residual = up_best - low_best;
    if (residual <= cfg.kkt_tol) break;
    if (iter >= budget || stalled > n) {
      throw ComputeError("svm did not converge within " + std::to_string(cfg.max_passes) +
                         " passes; max KKT residual " + std::to_string(residual));
    }

    const std::size_t i = pick_tied(up_ties, tie_eng);
    const std::size_t j = pick_tied(low_ties, tie_eng);
    const double yi = labels[i];
    const double yj = labels[j];

    const double eta = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    const double gi = yi - ftilde[i];
    const double gj = yj - ftilde[j];

    // Step t moves y_i alpha_i by +t and y_j alpha_j by -t, so each side is
    // rounded independently; the unconstrained optimum (gi - gj) / eta is
    // capped by whichever side hits its box bound first. A capped side lands
    // exactly on its bound, which keeps progress even when the admissible
    // room is below one ulp of the other side's alpha.
    const double ti_max = yi > 0.0 ? C - alpha[i] : alpha[i];
    const double tj_max = yj > 0.0 ? alpha[j] : C - alpha[j];
    const double t = std::min({(gi - gj) / eta, ti_max, tj_max});
    const double ai = t == ti_max ? (yi > 0.0 ? C : 0.0) : alpha[i] + yi * t;
    const double aj = t == tj_max ? (yj > 0.0 ? 0.0 : C) : alpha[j] - yj * t;

    const double di = ai - alpha[i];
    const double dj = aj - alpha[j];
    if (di == 0.0 && dj == 0.0) {
      ++stalled;
      continue;
    }
    stalled = 0;
    alpha[i] = ai;
    alpha[j] = aj;
    for (std::size_t k = 0; k < n; ++k) {
      ftilde[k] += di * yi * kernel(i, k) + dj * yj * kernel(j, k);
    }
  }

  // Bias from free support vectors; otherwise the midpoint of the interval
  // the bound constraints leave open.
  double bias;
  {
    double sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (alpha[k] > 0.0 && alpha[k] < C) {
        sum += static_cast<double>(labels[k]) - ftilde[k];
        ++free_count;
      }
    }
    if (free_count > 0) {
      bias = sum / static_cast<double>(free_count);
    } else {
      double up_best = -std::numeric_limits<double>::infinity();
      double low_best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        const double gk = static_cast<double>(labels[k]) - ftilde[k];
        const bool in_up = labels[k] == 1 ? alpha[k] < C : alpha[k] > 0.0;
        const bool in_low = labels[k] == 1 ? alpha[k] > 0.0 : alpha[k] < C;
        if (in_up) up_best = std::max(up_best, gk);
        if (in_low) low_best = std::min(low_best, gk);
      }
      bias = 0.5 * (up_best + low_best);
    }
  }

  SvmModel model;
  model.bias = bias;
  model.kernel_fingerprint = gram.kernel_fingerprint;
  model.diag_shift = diag_shift;
  model.training_size = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] > 0.0) {
      model.support_indices.push_back(k);
      model.dual_coefs.push_back(alpha[k] * static_cast<double>(labels[k]));
      model.support_labels.push_back(labels[k]);
    }
  }
  if (model.support_indices.empty()) {
    throw ComputeError("svm training produced no support vectors");
  }
  return model;
}

double decision(const SvmModel& model, const std::vector<double>& kcol) {
  if (kcol.size() != model.training_size) {
    throw ComputeError("kernel column length " + std::to_string(kcol.size()) +
                       " does not match training size " +
                       std::to_string(model.training_size));
  }
  double f = model.bias;
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
    f += model.dual_coefs[s] * kcol[model.support_indices[s]];
  }
  return f;
}

int predict(const SvmModel& model, const std::vector<double>& kcol) {
  return decision(model, kcol) >= 0.0 ? 1 : -1;
}

double svm_dual_objective(const GramMatrix& gram, const std::vector<int>& labels,
                          const std::vector<double>& alphas, double diag_shift) {
  if (alphas.size() != gram.rows || labels.size() != gram.rows) {
    throw ComputeError("dual objective inputs disagree with gram size");
  }
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < gram.rows; ++i) {
    linear += alphas[i];
    for (std::size_t j = 0; j < gram.cols; ++j) {
      const double kij = gram(i, j) + (i == j ? diag_shift : 0.0);
      quad += alphas[i] * alphas[j] * labels[i] * labels[j] * kij;
    }
  }
  return linear - 0.5 * quad;
}

nlohmann::json svm_to_json(const SvmModel& model) {
  return nlohmann::json{{"support_indices", model.support_indices},
                        {"dual_coefs", model.dual_coefs},
                        {"support_labels", model.support_labels},
                        {"bias", model.bias},
                        {"kernel_fingerprint", model.kernel_fingerprint},
                        {"diag_shift", model.diag_shift},
                        {"training_size", model.training_size}};
}

SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel model;
  model.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
  model.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
  model.support_labels = j.at("support_labels").get<std::vector<int>>();
  model.bias = j.at("bias").get<double>();
  model.kernel_fingerprint = j.at("kernel_fingerprint").get<std::string>();
  model.diag_shift = j.at("diag_shift").get<double>();
  model.training_size = j.at("training_size").get<std::size_t>();
  if (model.support_indices.size() != model.dual_coefs.size() ||
      model.support_indices.size() != model.support_labels.size()) {
    throw ConfigError("svm model fields disagree on support vector count");
  }
  return model;
}

}  // namespace flarecast
