#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flarecast/matrix.hpp"
#include "flarecast/mvts.hpp"

namespace flarecast {

enum class KernelKind { Gak, DtwRbf };

std::string kernel_kind_name(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);

// Kernel hyperparameters. `gamma` plays two roles: for GAK the local kernel
// bandwidth is sigma = sqrt(1 / (2 * gamma)); for DTW_RBF it is the RBF decay
// exp(-gamma * dtw^2). `band_width` restricts alignments to a Sakoe-Chiba band
// when set; unset means unconstrained.
struct KernelConfig {
  KernelKind kind = KernelKind::Gak;
  double gamma = 0.01;
  bool normalize = true;
  std::optional<int> band_width;

  void validate() const;
  double sigma() const;
  // Stable identity of the kernel family and its parameters. Gram caches are
  // keyed on this together with the dataset fingerprint.
  std::string fingerprint() const;
};

// Squared Euclidean distance between frame i of a and frame j of b.
// Frames are the per-timestamp columns of the P x T value matrix.
double frame_sqdist(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j);

// Dynamic time warping distance: sqrt of the minimal total squared frame
// distance over monotone alignment paths. Band, when given, limits |i - j|.
double dtw(const Matrix& a, const Matrix& b, std::optional<int> band = std::nullopt);

// log of the unnormalized global alignment kernel value. Computed entirely in
// log space; finite for any pair of equal-dimension series.
double gak_log(const Matrix& a, const Matrix& b, double sigma,
               std::optional<int> band = std::nullopt);
double gak(const Matrix& a, const Matrix& b, double sigma,
           std::optional<int> band = std::nullopt);

// Kernel value between two instances under `config`. GAK with normalize uses
// k(x,y)/sqrt(k(x,x) k(y,y)), evaluated as a difference of logs.
double kernel_value(const MvtsInstance& x, const MvtsInstance& y, const KernelConfig& config);

struct GramMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string row_fingerprint;
  std::string col_fingerprint;
  std::string kernel_fingerprint;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// Gram matrix of `rows` against `cols`. Symmetric case (same dataset passed
// twice) computes the upper triangle once and mirrors it. Deterministic for
// any thread count.
GramMatrix gram(const Dataset& rows, const Dataset& cols, const KernelConfig& config,
                int threads = 0);
GramMatrix gram_self(const Dataset& data, const KernelConfig& config, int threads = 0);

// Binary cache for Gram matrices. Load verifies the stored fingerprints
// against the requested ones and fails loudly on any mismatch.
void save_gram(const GramMatrix& g, const std::filesystem::path& path);
GramMatrix load_gram(const std::filesystem::path& path, const std::string& row_fingerprint,
                     const std::string& col_fingerprint, const std::string& kernel_fingerprint);

}  // namespace flarecast
