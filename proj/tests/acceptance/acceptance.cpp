// Acceptance gate for the artifact: nine end-to-end criteria, each printed as
// a single PASS/FAIL/SKIP line with its runtime and a short summary. The
// process exits nonzero when any selected criterion fails. Passing criterion
// numbers as arguments restricts the run to those criteria.
//
// The oracles here are deliberately independent of the library internals:
// exhaustive alignment-path enumeration for the time-series kernels, an exact
// active-set enumeration for the SVM dual, and constructed ground truth for
// the outlier detector and the apportionment rule.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flarecast/error.hpp"
#include "flarecast/eval.hpp"
#include "flarecast/iforest.hpp"
#include "flarecast/ingest.hpp"
#include "flarecast/matrix.hpp"
#include "flarecast/mvts.hpp"
#include "flarecast/pipeline.hpp"
#include "flarecast/preprocess.hpp"
#include "flarecast/rng.hpp"
#include "flarecast/svm.hpp"
#include "flarecast/tskernel.hpp"

namespace fc = flarecast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / (tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared random builders.

fc::Matrix random_series(fc::rng::Engine& eng, std::size_t p, std::size_t t,
                         double spread) {
  fc::Matrix m(p, t);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < t; ++c)
      m(r, c) = (fc::rng::uniform01(eng) * 2.0 - 1.0) * spread;
  return m;
}

fc::MvtsInstance make_instance(std::string id, const fc::Matrix& values) {
  fc::MvtsInstance inst;
  inst.instance_id = std::move(id);
  inst.flare_class = fc::FlareClass::N;
  for (std::size_t p = 0; p < values.rows(); ++p)
    inst.param_names.push_back("P" + std::to_string(p));
  inst.values = values;
  return inst;
}

// ---------------------------------------------------------------------------
// Criterion 1: DTW against exhaustive path enumeration.

void dtw_walk(const fc::Matrix& a, const fc::Matrix& b, std::size_t i, std::size_t j,
              double acc, double& best) {
  acc += fc::frame_sqdist(a, i, b, j);
  if (i + 1 == a.cols() && j + 1 == b.cols()) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < a.cols()) dtw_walk(a, b, i + 1, j, acc, best);
  if (j + 1 < b.cols()) dtw_walk(a, b, i, j + 1, acc, best);
  if (i + 1 < a.cols() && j + 1 < b.cols()) dtw_walk(a, b, i + 1, j + 1, acc, best);
}

double dtw_oracle(const fc::Matrix& a, const fc::Matrix& b) {
  double best = std::numeric_limits<double>::infinity();
  dtw_walk(a, b, 0, 0, 0.0, best);
  return std::sqrt(best);
}

Outcome crit_dtw() {
  fc::rng::Engine eng(101);
  double max_diff = 0.0;
  for (int round = 0; round < 200; ++round) {
    const std::size_t p = 1 + fc::rng::below(eng, 3);
    fc::Matrix a(p, 1 + fc::rng::below(eng, 5));
    fc::Matrix b(p, 1 + fc::rng::below(eng, 5));
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c)
        a(r, c) = static_cast<double>(fc::rng::below(eng, 5)) - 2.0;
      for (std::size_t c = 0; c < b.cols(); ++c)
        b(r, c) = static_cast<double>(fc::rng::below(eng, 5)) - 2.0;
    }
    max_diff = std::max(max_diff, std::fabs(fc::dtw(a, b) - dtw_oracle(a, b)));
  }
  Outcome o;
  o.require(max_diff <= 1e-9, "max |dtw - enumeration| = " + sci(max_diff) + " > 1e-9");
  if (o.pass) o.detail = "200 pairs, max |dtw - enumeration| = " + sci(max_diff);
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 2: GAK against exhaustive path enumeration plus PSD self-Gram.

double local_kernel(const fc::Matrix& a, std::size_t i, const fc::Matrix& b,
                    std::size_t j, double sigma) {
  const double e = std::exp(-fc::frame_sqdist(a, i, b, j) / (2.0 * sigma * sigma));
  return e / (2.0 - e);
}

void gak_walk(const fc::Matrix& a, const fc::Matrix& b, double sigma, std::size_t i,
              std::size_t j, double prod, double& total) {
  prod *= local_kernel(a, i, b, j, sigma);
  if (i + 1 == a.cols() && j + 1 == b.cols()) {
    total += prod;
    return;
  }
  if (i + 1 < a.cols()) gak_walk(a, b, sigma, i + 1, j, prod, total);
  if (j + 1 < b.cols()) gak_walk(a, b, sigma, i, j + 1, prod, total);
  if (i + 1 < a.cols() && j + 1 < b.cols())
    gak_walk(a, b, sigma, i + 1, j + 1, prod, total);
}

double gak_oracle(const fc::Matrix& a, const fc::Matrix& b, double sigma) {
  double total = 0.0;
  gak_walk(a, b, sigma, 0, 0, 1.0, total);
  return total;
}

Outcome crit_gak() {
  fc::rng::Engine eng(102);
  const double sigma = 1.0;
  double max_rel = 0.0;
  for (int round = 0; round < 100; ++round) {
    const std::size_t p = 1 + fc::rng::below(eng, 2);
    const auto a = random_series(eng, p, 1 + fc::rng::below(eng, 4), 1.0);
    const auto b = random_series(eng, p, 1 + fc::rng::below(eng, 4), 1.0);
    const double got = fc::gak(a, b, sigma);
    const double want = gak_oracle(a, b, sigma);
    max_rel = std::max(max_rel, std::fabs(got - want) / want);
  }

  Outcome o;
  o.require(max_rel <= 1e-6,
            "max relative |gak - enumeration| = " + sci(max_rel) + " > 1e-6");

  std::vector<fc::MvtsInstance> all;
  for (std::size_t i = 0; i < 20; ++i)
    all.push_back(make_instance("g-" + std::to_string(i), random_series(eng, 2, 15, 1.0)));
  const fc::Dataset ds(std::move(all));
  fc::KernelConfig kc;
  kc.kind = fc::KernelKind::Gak;
  kc.gamma = 0.5;
  kc.normalize = true;
  const auto g = fc::gram_self(ds, kc);
  double diag_err = 0.0;
  for (std::size_t i = 0; i < g.rows; ++i)
    diag_err = std::max(diag_err, std::fabs(g(i, i) - 1.0));
  const double min_eig = fc::min_eigenvalue(g);
  o.require(diag_err <= 1e-12, "normalized self-Gram diagonal off by " + sci(diag_err));
  o.require(min_eig >= -1e-8, "self-Gram min eigenvalue " + sci(min_eig) + " < -1e-8");
  if (o.pass)
    o.detail = "100 pairs, max rel diff = " + sci(max_rel) +
               "; 20x20 self-Gram unit diagonal, min eig = " + sci(min_eig);
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 3: SVM dual against an exact boxed-QP oracle.

fc::GramMatrix make_gram(std::size_t n, const std::vector<double>& values) {
  fc::GramMatrix g;
  g.rows = n;
  g.cols = n;
  g.row_fingerprint = "rows";
  g.col_fingerprint = "rows";
  g.kernel_fingerprint = "kern";
  g.values = values;
  return g;
}

// Normalized Gram of random gaussian vectors: PSD with a unit diagonal.
fc::GramMatrix random_psd_gram(fc::rng::Engine& eng, std::size_t n) {
  const std::size_t m = n + 2;
  std::vector<std::vector<double>> factors(n, std::vector<double>(m));
  for (auto& row : factors)
    for (auto& v : row) v = fc::rng::gaussian(eng);
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < m; ++k) dot += factors[i][k] * factors[j][k];
      values[i * n + j] = dot;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j)
        values[i * n + j] /= std::sqrt(values[i * n + i] * values[j * n + j]);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) values[j * n + i] = values[i * n + j];
  return make_gram(n, values);
}

std::vector<int> random_labels(fc::rng::Engine& eng, std::size_t n) {
  std::vector<int> y(n);
  for (;;) {
    bool pos = false, neg = false;
    for (auto& v : y) {
      v = fc::rng::below(eng, 2) ? 1 : -1;
      (v == 1 ? pos : neg) = true;
    }
    if (pos && neg) return y;
  }
}

double dual_objective(const fc::GramMatrix& k, const std::vector<int>& y,
                      const std::vector<double>& a) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < k.rows; ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < k.rows; ++j)
      quad += a[i] * a[j] * y[i] * y[j] * k(i, j);
  }
  return lin - 0.5 * quad;
}

std::vector<double> model_alphas(const fc::SvmModel& m) {
  std::vector<double> a(m.training_size, 0.0);
  for (std::size_t s = 0; s < m.support_indices.size(); ++s)
    a[m.support_indices[s]] = m.dual_coefs[s] * m.support_labels[s];
  return a;
}

// Exact reference for the box-and-equality-constrained dual: enumerate every
// assignment of points to {alpha=0, free, alpha=C}, solve the stationarity
// system of each assignment, keep KKT-consistent candidates and return the
// best objective. Exhaustive for n <= 8 (3^8 assignments), independent of the
// pairwise solver.
double exact_dual_optimum(const fc::GramMatrix& k, const std::vector<int>& y, double C) {
  const int n = static_cast<int>(k.rows);
  const double eps = 1e-7 * std::max(1.0, C);
  long assignments = 1;
  for (int i = 0; i < n; ++i) assignments *= 3;

  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> state(static_cast<std::size_t>(n));
  std::vector<double> a(static_cast<std::size_t>(n));

  for (long code = 0; code < assignments; ++code) {
    long rem = code;
    std::vector<int> free_set;
    for (int i = 0; i < n; ++i, rem /= 3) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(rem % 3);
      if (state[static_cast<std::size_t>(i)] == 1) free_set.push_back(i);
    }

    for (int i = 0; i < n; ++i)
      a[static_cast<std::size_t>(i)] = state[static_cast<std::size_t>(i)] == 2 ? C : 0.0;

    double lambda = 0.0;
    if (!free_set.empty()) {
      const int f = static_cast<int>(free_set.size());
      Eigen::MatrixXd sys(f + 1, f + 1);
      Eigen::VectorXd rhs(f + 1);
      sys.setZero();
      for (int r = 0; r < f; ++r) {
        const int i = free_set[static_cast<std::size_t>(r)];
        for (int c = 0; c < f; ++c) {
          const int j = free_set[static_cast<std::size_t>(c)];
          sys(r, c) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
                      k(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
        sys(r, f) = y[static_cast<std::size_t>(i)];
        double bound_term = 0.0;
        for (int j = 0; j < n; ++j)
          if (state[static_cast<std::size_t>(j)] == 2)
            bound_term += C * y[static_cast<std::size_t>(i)] *
                          y[static_cast<std::size_t>(j)] *
                          k(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        rhs(r) = 1.0 - bound_term;
      }
      for (int c = 0; c < f; ++c)
        sys(f, c) = y[static_cast<std::size_t>(free_set[static_cast<std::size_t>(c)])];
      double bound_sum = 0.0;
      for (int j = 0; j < n; ++j)
        if (state[static_cast<std::size_t>(j)] == 2)
          bound_sum += C * y[static_cast<std::size_t>(j)];
      rhs(f) = -bound_sum;

      const Eigen::VectorXd sol = sys.colPivHouseholderQr().solve(rhs);
      if (((sys * sol - rhs).cwiseAbs().maxCoeff()) > eps) continue;  // inconsistent
      bool in_box = true;
      for (int r = 0; r < f; ++r) {
        const double v = sol(r);
        if (v < -eps || v > C + eps) in_box = false;
        a[static_cast<std::size_t>(free_set[static_cast<std::size_t>(r)])] =
            std::clamp(v, 0.0, C);
      }
      if (!in_box) continue;
      lambda = sol(f);
    } else {
      double balance = 0.0;
      for (int i = 0; i < n; ++i)
        balance += a[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
      if (std::fabs(balance) > eps) continue;
    }

    // Gradient of the dual at the candidate.
    std::vector<double> grad(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        grad[static_cast<std::size_t>(i)] -=
            a[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(i)] *
            y[static_cast<std::size_t>(j)] *
            k(static_cast<std::size_t>(i), static_cast<std::size_t>(j));

    if (free_set.empty()) {
      // lambda only needs to exist: intersect the per-point sign intervals.
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double g = grad[static_cast<std::size_t>(i)];
        const double yy = y[static_cast<std::size_t>(i)];
        if (state[static_cast<std::size_t>(i)] == 0) {
          // need g - lambda*y <= 0
          if (yy > 0) lo = std::max(lo, g);
          else hi = std::min(hi, -g);
        } else {
          // alpha=C needs g - lambda*y >= 0
          if (yy > 0) hi = std::min(hi, g);
          else lo = std::max(lo, -g);
        }
      }
      if (lo > hi + eps) continue;
    } else {
      bool signs_ok = true;
      for (int i = 0; i < n && signs_ok; ++i) {
        const double slack =
            grad[static_cast<std::size_t>(i)] - lambda * y[static_cast<std::size_t>(i)];
        if (state[static_cast<std::size_t>(i)] == 0 && slack > eps) signs_ok = false;
        if (state[static_cast<std::size_t>(i)] == 2 && slack < -eps) signs_ok = false;
      }
      if (!signs_ok) continue;
    }

    best = std::max(best, dual_objective(k, y, a));
  }
  return best;
}

Outcome crit_svm() {
  fc::rng::Engine eng(103);
  fc::SvmConfig cfg;
  cfg.kkt_tol = 1e-10;
  const double cs[] = {1.0, 10.0, 100.0};
  double max_gap = 0.0, max_kkt = 0.0;
  Outcome o;
  for (int round = 0; round < 50 && o.pass; ++round) {
    const std::size_t n = 3 + fc::rng::below(eng, 6);  // 3..8 points
    const auto gram = random_psd_gram(eng, n);
    const auto labels = random_labels(eng, n);
    cfg.C = cs[fc::rng::below(eng, 3)];

    const auto model = fc::train_svm(gram, labels, cfg);
    const auto alphas = model_alphas(model);
    const double got = dual_objective(gram, labels, alphas);
    const double want = exact_dual_optimum(gram, labels, cfg.C);
    max_gap = std::max(max_gap, std::fabs(got - want));
    o.require(std::fabs(got - want) <= 1e-6,
              "round " + std::to_string(round) + ": |dual - exact optimum| = " +
                  sci(std::fabs(got - want)) + " > 1e-6");

    double balance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      balance += alphas[i] * labels[i];
      o.require(alphas[i] >= 0.0 && alphas[i] <= cfg.C, "alpha outside the box");
    }
    o.require(std::fabs(balance) <= 1e-6 * cfg.C, "dual balance violated");

    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> kcol(n);
      for (std::size_t j = 0; j < n; ++j) kcol[j] = gram(i, j);
      const double margin = labels[i] * fc::decision(model, kcol);
      double violation = 0.0;
      if (alphas[i] == 0.0) violation = std::max(0.0, 1.0 - margin);
      else if (alphas[i] == cfg.C) violation = std::max(0.0, margin - 1.0);
      else violation = std::fabs(margin - 1.0);
      max_kkt = std::max(max_kkt, violation);
      o.require(violation <= cfg.kkt_tol + 1e-9,
                "round " + std::to_string(round) +
                    ": KKT margin violation = " + sci(violation));
    }
  }
  if (o.pass)
    o.detail = "50 problems, max |dual - exact optimum| = " + sci(max_gap) +
               ", max KKT violation = " + sci(max_kkt);
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 4: isolation forest recovers planted outliers.

Outcome crit_iforest() {
  Outcome o;
  const std::size_t n_inlier = 475, n_outlier = 25, dim = 10;
  const std::vector<double> ladder = {0.01, 0.03, 0.05, 0.10, 0.20};
  double precision_sum = 0.0;
  for (int round = 0; round < 10 && o.pass; ++round) {
    fc::rng::Engine eng(9000 + round);
    std::vector<fc::FeatureVector> vectors;
    std::vector<std::string> ids;
    std::set<std::string> planted;
    char buf[16];
    for (std::size_t i = 0; i < n_inlier + n_outlier; ++i) {
      const bool outlier = i >= n_inlier;
      fc::FeatureVector v(dim);
      for (auto& x : v) x = fc::rng::gaussian(eng) + (outlier ? 6.0 : 0.0);
      vectors.push_back(std::move(v));
      std::snprintf(buf, sizeof(buf), "%c-%04zu", outlier ? 'o' : 'n', i);
      ids.emplace_back(buf);
      if (outlier) planted.insert(ids.back());
    }

    fc::IForestConfig cfg;
    cfg.seed = 42 + static_cast<std::uint64_t>(round);
    const auto model = fc::fit_iforest(vectors, cfg, 0);

    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const double s = fc::score(model, vectors[i]);
      o.require(s > 0.0 && s < 1.0, "score outside (0,1): " + sci(s));
      scored.emplace_back(ids[i], s);
    }

    std::set<std::string> prev;
    for (double r : ladder) {
      const auto flags = fc::flag_outliers(scored, r);
      o.require(std::includes(flags.begin(), flags.end(), prev.begin(), prev.end()),
                "flag sets not nested between rates");
      prev = flags;
    }

    const auto flags = fc::flag_outliers(scored, 0.05);
    o.require(flags.size() == n_outlier, "expected 25 flags at r=0.05");
    std::size_t hits = 0;
    for (const auto& id : flags) hits += planted.count(id);
    precision_sum += static_cast<double>(hits) / static_cast<double>(flags.size());
  }
  const double mean_precision = precision_sum / 10.0;
  o.require(mean_precision >= 0.8,
            "mean precision at r=0.05 = " + fixed3(mean_precision) + " < 0.8");
  if (o.pass)
    o.detail = "10 seeds, mean precision at r=0.05 = " + fixed3(mean_precision) +
               ", scores in (0,1), nested flag sets";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 5: skill-score golden values and exact symmetries.

Outcome crit_metrics() {
  Outcome o;
  fc::ConfusionMatrix worked{8, 1, 2, 9};
  o.require(fc::tss(worked) == 0.7, "tss(8,1,2,9) != 0.7");
  o.require(fc::hss2(worked) == 0.7, "hss2(8,1,2,9) != 0.7");
  fc::ConfusionMatrix perfect{5, 0, 0, 5};
  o.require(fc::tss(perfect) == 1.0, "tss(perfect) != 1");
  o.require(fc::hss2(perfect) == 1.0, "hss2(perfect) != 1");
  fc::ConfusionMatrix always_yes{10, 10, 0, 0};
  o.require(fc::tss(always_yes) == 0.0, "tss(always-yes) != 0");
  o.require(fc::hss2(always_yes) == 0.0, "hss2(always-yes) != 0");
  fc::ConfusionMatrix coin{5, 5, 5, 5};
  o.require(fc::tss(coin) == 0.0, "tss(coin) != 0");
  o.require(fc::hss2(coin) == 0.0, "hss2(coin) != 0");

  fc::rng::Engine eng(105);
  for (int round = 0; round < 1000 && o.pass; ++round) {
    fc::ConfusionMatrix cm;
    do {
      cm.tp = static_cast<long long>(fc::rng::below(eng, 50));
      cm.fp = static_cast<long long>(fc::rng::below(eng, 50));
      cm.fn = static_cast<long long>(fc::rng::below(eng, 50));
      cm.tn = static_cast<long long>(fc::rng::below(eng, 50));
    } while (cm.actual_positives() == 0 || cm.actual_negatives() == 0 ||
             cm.actual_positives() * (cm.fn + cm.tn) +
                     cm.actual_negatives() * (cm.tp + cm.fp) ==
                 0);

    const long long k = 2 + static_cast<long long>(fc::rng::below(eng, 6));
    const fc::ConfusionMatrix scaled{cm.tp * k, cm.fp * k, cm.fn * k, cm.tn * k};
    o.require(fc::tss(scaled) == fc::tss(cm), "tss not scale-invariant");
    o.require(fc::hss2(scaled) == fc::hss2(cm), "hss2 not scale-invariant");

    // Inverting every prediction swaps tp<->fn and fp<->tn.
    const fc::ConfusionMatrix swapped{cm.fn, cm.tn, cm.tp, cm.fp};
    o.require(fc::tss(swapped) == -fc::tss(cm), "tss not antisymmetric under label swap");
  }
  if (o.pass)
    o.detail = "worked examples exact; 1000 random matrices scale-invariant and "
               "swap-antisymmetric";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 6: climatology-preserving apportionment.

Outcome crit_climatology() {
  Outcome o;
  const auto targets = fc::largest_remainder_targets(
      1254, {{fc::FlareClass::C, 6416}, {fc::FlareClass::B, 5692}, {fc::FlareClass::N, 60130}});
  o.require(targets == std::vector<std::size_t>({111, 99, 1044}),
            "reference populations did not apportion to 111/99/1044");

  const fc::FlareClass weak[] = {fc::FlareClass::C, fc::FlareClass::B, fc::FlareClass::N};
  fc::rng::Engine eng(106);
  for (int round = 0; round < 1000 && o.pass; ++round) {
    const std::size_t m = 1 + fc::rng::below(eng, 3);
    std::vector<std::pair<fc::FlareClass, std::size_t>> pops;
    long long grand = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t p = 1 + fc::rng::below(eng, 5000);
      pops.emplace_back(weak[i], p);
      grand += static_cast<long long>(p);
    }
    const std::size_t total = fc::rng::below(eng, static_cast<std::uint64_t>(grand) + 1);
    const auto got = fc::largest_remainder_targets(total, pops);

    std::size_t sum = 0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += got[i];
      o.require(got[i] <= pops[i].second, "target exceeds its population");
      // |target - total*pop/grand| < 1, checked in exact integers.
      const long long lhs = static_cast<long long>(got[i]) * grand;
      const long long rhs = static_cast<long long>(total) * static_cast<long long>(pops[i].second);
      o.require(std::llabs(lhs - rhs) < grand, "target deviates from its quota by >= 1");
    }
    o.require(sum == total, "targets do not sum to the minority count");
  }
  if (o.pass)
    o.detail = "reference counts give 111/99/1044; 1000 random vectors within "
               "quota deviation < 1, exact totals";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 7: removing planted majority outliers improves skill, and
// over-removal degrades it at the tail of the contamination grid.

Outcome crit_sweep_direction() {
  const std::vector<double> grid = {0.0, 0.05, 0.10, 0.15, 0.30, 0.50};
  const int n_seeds = 10;

  std::vector<double> tss_curve(grid.size(), 0.0), hss2_curve(grid.size(), 0.0);
  for (int s = 0; s < n_seeds; ++s) {
    // The scaled C instances land exactly on the small X sub-population
    // (1.45 * 100/87 * 3 = 5), so each training fold carries a clutch of
    // strong-looking instances labeled quiet -- the kind of corruption that
    // drags the baseline down until the detector removes it. Test partitions
    // keep a different class mix, as temporally split observation campaigns do.
    fc::SynthConfig train;
    train.n_per_class = {{fc::FlareClass::X, 10},
                         {fc::FlareClass::M, 140},
                         {fc::FlareClass::C, 800},
                         {fc::FlareClass::B, 150},
                         {fc::FlareClass::N, 100}};
    train.P = 2;
    train.T = 8;
    train.noise_sd = 0.5;
    train.outlier_fraction = 0.10;
    train.outlier_magnitude = 1.45;
    train.class_signal[fc::FlareClass::C] = {0.0, 100.0 / 87.0};
    train.seed = 1000 + static_cast<std::uint64_t>(s);

    fc::SynthConfig test = train;
    test.n_per_class = {{fc::FlareClass::X, 12},
                        {fc::FlareClass::M, 38},
                        {fc::FlareClass::C, 200},
                        {fc::FlareClass::B, 37},
                        {fc::FlareClass::N, 25}};
    test.outlier_fraction = 0.0;
    test.seed = 2000 + static_cast<std::uint64_t>(s);

    const auto data =
        fc::merge({fc::generate_synthetic(train).first,
                   fc::with_partition(fc::generate_synthetic(test).first, 2)});

    fc::ExperimentConfig cfg;
    cfg.test_partitions = {2};
    cfg.contamination_grid = grid;
    cfg.n_trials = 2;
    cfg.kernel.gamma = 8.0;
    cfg.master_seed = static_cast<std::uint64_t>(s);

    const auto out = fc::run_sweep(cfg, data, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      tss_curve[i] += out.report.cells[i].tss.mean / n_seeds;
      hss2_curve[i] += out.report.cells[i].hss2.mean / n_seeds;
    }
  }

  const double tss_base = tss_curve.front();
  std::size_t tss_arg = 0, hss2_arg = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (tss_curve[i] > tss_curve[tss_arg]) tss_arg = i;
    if (hss2_curve[i] > hss2_curve[hss2_arg]) hss2_arg = i;
  }

  Outcome o;
  std::string curve = "tss r=0: " + fixed3(tss_base) + ", max " + fixed3(tss_curve[tss_arg]) +
                      " at r=" + fixed3(grid[tss_arg]) + "; hss2 max " +
                      fixed3(hss2_curve[hss2_arg]) + " at r=" + fixed3(grid[hss2_arg]) +
                      ", last " + fixed3(hss2_curve.back());
  o.require(tss_curve[tss_arg] >= tss_base + 0.05,
            "mean TSS gain over r=0 is " + fixed3(tss_curve[tss_arg] - tss_base) +
                " < 0.05 (" + curve + ")");
  o.require(hss2_curve.back() < hss2_curve[hss2_arg],
            "mean HSS2 did not drop at the grid tail (" + curve + ")");
  if (o.pass) o.detail = "10 seeds; " + curve;
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 8: the emitted manifest proves the split protocol and reports are
// byte-for-byte reproducible from the master seed.

Outcome crit_audit() {
  fc::SynthConfig train;
  train.n_per_class = {{fc::FlareClass::X, 6},
                       {fc::FlareClass::M, 6},
                       {fc::FlareClass::C, 8},
                       {fc::FlareClass::B, 8},
                       {fc::FlareClass::N, 10}};
  train.P = 2;
  train.T = 6;
  train.noise_sd = 0.4;
  train.seed = 81;
  fc::SynthConfig test = train;
  test.n_per_class = {{fc::FlareClass::X, 3},
                      {fc::FlareClass::M, 3},
                      {fc::FlareClass::C, 4},
                      {fc::FlareClass::B, 4},
                      {fc::FlareClass::N, 6}};
  test.seed = 82;
  const auto data = fc::merge({fc::generate_synthetic(train).first,
                               fc::with_partition(fc::generate_synthetic(test).first, 2)});

  fc::ExperimentConfig cfg;
  cfg.test_partitions = {2};
  cfg.contamination_grid = {0.0, 0.1, 0.3};
  cfg.n_trials = 2;
  cfg.kernel.gamma = 1.0;
  cfg.master_seed = 7;

  Outcome o;
  const auto out = fc::run_sweep(cfg, data, 0);
  TempDir dir_a("fc-acc-audit-a"), dir_b("fc-acc-audit-b");
  fc::emit_report(out, dir_a.path);

  // Audit the manifest as parsed back from disk, not the in-memory copy.
  const auto manifest = fc::manifest_from_json(
      nlohmann::json::parse(read_file(dir_a.path / "manifest.json")));
  try {
    fc::audit_manifest(manifest);
  } catch (const std::exception& e) {
    o.require(false, std::string("audit rejected an honest manifest: ") + e.what());
  }

  // The audit must be discriminative: a train id copied into a test partition
  // and a fold fitted on ids that differ from its stamp must both be caught.
  auto tampered = manifest;
  tampered.test_ids.begin()->second.push_back(tampered.trials.front().train_ids.front());
  bool caught = false;
  try {
    fc::audit_manifest(tampered);
  } catch (const fc::Error&) {
    caught = true;
  }
  o.require(caught, "audit accepted a train id inside a test partition");

  tampered = manifest;
  tampered.trials.front().train_ids.pop_back();
  caught = false;
  try {
    fc::audit_manifest(tampered);
  } catch (const fc::Error&) {
    caught = true;
  }
  o.require(caught, "audit accepted a normalization stamp that does not match its fold");

  // Same master seed, different thread count: identical bytes.
  const auto again = fc::run_sweep(cfg, data, 4);
  fc::emit_report(again, dir_b.path);
  const auto bytes_a = read_file(dir_a.path / "report.json");
  const auto bytes_b = read_file(dir_b.path / "report.json");
  o.require(!bytes_a.empty() && bytes_a == bytes_b,
            "report.json differs between reruns with the same master seed");
  if (o.pass)
    o.detail = "manifest audit passes and catches tampering; report.json identical "
               "across reruns (" +
               std::to_string(bytes_a.size()) + " bytes)";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 9: smoke run on a locally provided dataset in the partitioned
// CSV layout, capped to 200 instances per partition.

Outcome crit_data_smoke() {
  Outcome o;
  const char* env = std::getenv("FLARECAST_SWANSF_DIR");
  if (env == nullptr) {
    o.skipped = true;
    o.detail = "set FLARECAST_SWANSF_DIR to a data directory with partition-1 and "
               "partition-2 to enable";
    return o;
  }
  const fs::path dir(env);
  if (!fs::exists(dir / "partition-1" / "manifest.csv") ||
      !fs::exists(dir / "partition-2" / "manifest.csv")) {
    o.skipped = true;
    o.detail = "no partition-1/partition-2 manifests under " + dir.string();
    return o;
  }

  auto cfg = fc::experiment_a();
  cfg.test_partitions = {2};

  const auto full = fc::load_data_dir(dir);
  std::vector<fc::Dataset> parts;
  for (int k : {1, 2})
    parts.push_back(fc::stratified_cap(fc::slice_partition(full, k), 200,
                                       fc::rng::combine(cfg.master_seed,
                                                        static_cast<std::uint64_t>(k))));
  const auto data = fc::merge(parts);

  const auto out = fc::run_sweep(cfg, data, 0);
  TempDir dir_out("fc-acc-data-smoke");
  fc::emit_report(out, dir_out.path);

  const auto report = fc::report_from_json(
      nlohmann::json::parse(read_file(dir_out.path / "report.json")));
  o.require(report.cells.size() == cfg.contamination_grid.size(),
            "report does not cover the full contamination grid");
  for (const auto& cell : report.cells) {
    o.require(cell.tss.values.size() == static_cast<std::size_t>(cfg.n_trials),
              "cell is missing trials");
    o.require(std::isfinite(cell.tss.mean) && std::isfinite(cell.hss2.mean),
              "non-finite cell mean");
  }
  o.require(report.dataset_fingerprint == fc::dataset_fingerprint(data),
            "report fingerprint does not match the capped dataset");
  try {
    fc::audit_manifest(fc::manifest_from_json(
        nlohmann::json::parse(read_file(dir_out.path / "manifest.json"))));
  } catch (const std::exception& e) {
    o.require(false, std::string("manifest audit failed: ") + e.what());
  }
  if (o.pass)
    o.detail = "capped to 200/partition, " + std::to_string(report.cells.size()) +
               " cells, audit passed";
  return o;
}

// ---------------------------------------------------------------------------

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> table = {
      {1, "dtw-matches-path-enumeration", 5.0, crit_dtw},
      {2, "gak-matches-path-enumeration", 10.0, crit_gak},
      {3, "svm-dual-matches-exact-qp", 30.0, crit_svm},
      {4, "iforest-recovers-planted-outliers", 30.0, crit_iforest},
      {5, "skill-score-goldens-and-symmetries", 30.0, crit_metrics},
      {6, "climatology-quota-apportionment", 30.0, crit_climatology},
      {7, "contamination-sweep-improves-skill", 600.0, crit_sweep_direction},
      {8, "split-audit-and-byte-reproducibility", 120.0, crit_audit},
      {9, "partitioned-data-subsample-smoke", 600.0, crit_data_smoke},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    try {
      wanted.insert(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::fprintf(stderr, "usage: %s [criterion-number...]\n", argv[0]);
      return 2;
    }
  }

  bool all_ok = true;
  for (const auto& crit : criteria()) {
    if (!wanted.empty() && wanted.count(crit.number) == 0) continue;

    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = crit.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("unexpected exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!o.skipped && secs > crit.budget_s) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ");
      o.detail += "over the " + fixed3(crit.budget_s) + "s budget";
    }
    const bool ok = o.skipped || o.pass;
    all_ok = all_ok && ok;
    std::printf("%-4s %d %-38s (%7.2fs) %s\n", o.skipped ? "SKIP" : (ok ? "PASS" : "FAIL"),
                crit.number, crit.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
