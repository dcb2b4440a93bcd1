#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flarecast/tskernel.hpp"

namespace flarecast {

struct SvmConfig {
  double C = 100.0;
  double kkt_tol = 1e-3;
  // Iteration budget in units of full passes: training fails after
  // max_passes * n pair updates without reaching the stopping criterion.
  int max_passes = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SvmModel {
  std::vector<std::size_t> support_indices;  // ascending
  std::vector<double> dual_coefs;            // alpha_i * y_i per support vector
  std::vector<int> support_labels;
  double bias = 0.0;
  std::string kernel_fingerprint;
  double diag_shift = 0.0;
  std::size_t training_size = 0;
};

// Smallest eigenvalue of a square Gram matrix.
double min_eigenvalue(const GramMatrix& g);

// Diagonal shift making a possibly indefinite Gram positive definite:
// max(0, -min_eig) + 1e-10. Zero-cost for matrices that are already PSD
// beyond that margin. Used for the DTW pseudo-kernel before training.
double compute_diag_shift(const GramMatrix& g);

// Maximizes the soft-margin SVM dual over the precomputed training Gram.
// `diag_shift` is added to the Gram diagonal during optimization only.
// Fails with the largest KKT residual if the stopping criterion is not met
// within the pass budget.
SvmModel train_svm(const GramMatrix& gram, const std::vector<int>& labels,
                   const SvmConfig& cfg, double diag_shift = 0.0);

// Decision value for one instance given its kernel evaluations against all
// training instances (in training order).
double decision(const SvmModel& model, const std::vector<double>& kcol);
int predict(const SvmModel& model, const std::vector<double>& kcol);

// Dual objective W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
// with the diagonal shift applied; used by tests and convergence checks.
double svm_dual_objective(const GramMatrix& gram, const std::vector<int>& labels,
                          const std::vector<double>& alphas, double diag_shift = 0.0);

nlohmann::json svm_to_json(const SvmModel& model);
SvmModel svm_from_json(const nlohmann::json& j);

}  // namespace flarecast
