// Python bindings for the core time-series kernel, outlier-detection and
// classification operations. The module mirrors the C++ API closely: inputs
// are plain lists, matrices are lists of rows, and errors surface as the
// exception types registered below.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flarecast/error.hpp"
#include "flarecast/eval.hpp"
#include "flarecast/iforest.hpp"
#include "flarecast/matrix.hpp"
#include "flarecast/mvts.hpp"
#include "flarecast/preprocess.hpp"
#include "flarecast/svm.hpp"
#include "flarecast/tskernel.hpp"
#include "flarecast/version.hpp"

namespace py = pybind11;
namespace fc = flarecast;

namespace {

using Rows = std::vector<std::vector<double>>;

fc::Matrix to_matrix(const Rows& rows) { return fc::Matrix::from_rows(rows); }

// Wraps raw series (each a P x T list of parameter rows) into a dataset with
// synthetic ids so the Gram machinery can be reused from Python.
fc::Dataset to_dataset(const std::vector<Rows>& series) {
  std::vector<fc::MvtsInstance> instances;
  instances.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    fc::MvtsInstance inst;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "py-%05zu", i);
    inst.instance_id = buf;
    inst.values = to_matrix(series[i]);
    inst.param_names.reserve(inst.values.rows());
    for (std::size_t p = 0; p < inst.values.rows(); ++p)
      inst.param_names.push_back("PARAM" + std::to_string(p));
    instances.push_back(std::move(inst));
  }
  return fc::Dataset(std::move(instances));
}

fc::KernelConfig make_kernel_config(const std::string& kind, double gamma, bool normalize,
                                    std::optional<int> band_width) {
  fc::KernelConfig config;
  config.kind = fc::parse_kernel_kind(kind);
  config.gamma = gamma;
  config.normalize = normalize;
  config.band_width = band_width;
  config.validate();
  return config;
}

fc::GramMatrix to_gram(const Rows& values) {
  fc::GramMatrix g;
  g.rows = values.size();
  g.cols = values.empty() ? 0 : values.front().size();
  g.values.reserve(g.rows * g.cols);
  for (const auto& row : values) {
    if (row.size() != g.cols) throw fc::ConfigError("gram rows have unequal lengths");
    g.values.insert(g.values.end(), row.begin(), row.end());
  }
  return g;
}

Rows from_gram(const fc::GramMatrix& g) {
  Rows out(g.rows, std::vector<double>(g.cols, 0.0));
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) out[i][j] = g(i, j);
  return out;
}

std::vector<std::pair<fc::FlareClass, std::size_t>> to_populations(
    const std::vector<std::pair<std::string, std::size_t>>& populations) {
  std::vector<std::pair<fc::FlareClass, std::size_t>> out;
  out.reserve(populations.size());
  for (const auto& [name, count] : populations)
    out.emplace_back(fc::parse_flare_class(name), count);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Time-series kernels (DTW, global alignment), isolation-forest outlier "
      "scoring, climatology-preserving undersampling targets, kernel SVM "
      "training and skill-score evaluation.";

  py::register_exception<fc::Error>(m, "Error");
  py::register_exception<fc::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<fc::ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  m.def("version", [] { return std::string(fc::kVersion); },
        "Library version string.");

  // ---- time-series kernels -------------------------------------------------

  m.def(
      "dtw",
      [](const Rows& a, const Rows& b, std::optional<int> band_width) {
        return fc::dtw(to_matrix(a), to_matrix(b), band_width);
      },
      py::arg("a"), py::arg("b"), py::arg("band_width") = std::nullopt,
      "Dynamic time warping distance between two P x T series given as lists "
      "of parameter rows. band_width limits |i - j| along alignment paths.");

  m.def(
      "gak",
      [](const Rows& a, const Rows& b, double sigma, std::optional<int> band_width) {
        return fc::gak(to_matrix(a), to_matrix(b), sigma, band_width);
      },
      py::arg("a"), py::arg("b"), py::arg("sigma"), py::arg("band_width") = std::nullopt,
      "Unnormalized global alignment kernel value.");

  m.def(
      "kernel_value",
      [](const Rows& a, const Rows& b, const std::string& kind, double gamma, bool normalize,
         std::optional<int> band_width) {
        const auto config = make_kernel_config(kind, gamma, normalize, band_width);
        fc::MvtsInstance x, y;
        x.values = to_matrix(a);
        y.values = to_matrix(b);
        return fc::kernel_value(x, y, config);
      },
      py::arg("a"), py::arg("b"), py::arg("kind") = "gak", py::arg("gamma") = 0.01,
      py::arg("normalize") = true, py::arg("band_width") = std::nullopt,
      "Kernel value under the named kernel: 'gak' (optionally normalized to "
      "unit self-similarity) or 'dtw_rbf' (exp(-gamma * dtw^2)).");

  m.def(
      "gram",
      [](const std::vector<Rows>& series, const std::string& kind, double gamma, bool normalize,
         std::optional<int> band_width, int threads) {
        const auto config = make_kernel_config(kind, gamma, normalize, band_width);
        return from_gram(fc::gram_self(to_dataset(series), config, threads));
      },
      py::arg("series"), py::arg("kind") = "gak", py::arg("gamma") = 0.01,
      py::arg("normalize") = true, py::arg("band_width") = std::nullopt, py::arg("threads") = 0,
      "Self Gram matrix over a list of P x T series, as a list of rows.");

  // ---- skill scores ----------------------------------------------------------

  m.def(
      "tss",
      [](long long tp, long long fp, long long fn, long long tn) {
        return fc::tss(fc::ConfusionMatrix{tp, fp, fn, tn});
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"),
      "True skill statistic: recall + specificity - 1.");

  m.def(
      "hss2",
      [](long long tp, long long fp, long long fn, long long tn) {
        return fc::hss2(fc::ConfusionMatrix{tp, fp, fn, tn});
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"),
      "Heidke skill score against the random-chance baseline.");

  // ---- isolation forest ------------------------------------------------------

  m.def(
      "iforest_scores",
      [](const std::vector<std::vector<double>>& vectors, int n_trees, int subsample_size,
         std::uint64_t seed, int threads) {
        fc::IForestConfig cfg;
        cfg.n_trees = n_trees;
        cfg.subsample_size = subsample_size;
        cfg.seed = seed;
        cfg.validate();
        const auto model = fc::fit_iforest(vectors, cfg, threads);
        std::vector<double> out;
        out.reserve(vectors.size());
        for (const auto& v : vectors) out.push_back(fc::score(model, v));
        return out;
      },
      py::arg("vectors"), py::arg("n_trees") = 100, py::arg("subsample_size") = 256,
      py::arg("seed") = 0, py::arg("threads") = 1,
      "Anomaly score in (0,1) for each feature vector, higher = more isolated.");

  m.def(
      "flag_outliers",
      [](const std::vector<std::string>& ids, const std::vector<double>& scores,
         double contamination) {
        if (ids.size() != scores.size())
          throw fc::ConfigError("ids and scores must have the same length");
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) scored.emplace_back(ids[i], scores[i]);
        const auto flagged = fc::flag_outliers(scored, contamination);
        return std::vector<std::string>(flagged.begin(), flagged.end());
      },
      py::arg("ids"), py::arg("scores"), py::arg("contamination"),
      "Ids of the floor(contamination * n) highest-scoring instances, sorted.");

  // ---- undersampling ---------------------------------------------------------

  m.def(
      "climatology_targets",
      [](std::size_t total, const std::vector<std::pair<std::string, std::size_t>>& populations) {
        return fc::largest_remainder_targets(total, to_populations(populations));
      },
      py::arg("total"), py::arg("populations"),
      "Largest-remainder apportionment of `total` across (class, population) "
      "pairs; targets sum to `total` exactly.");

  // ---- SVM --------------------------------------------------------------------

  py::class_<fc::SvmModel>(m, "SvmModel")
      .def_readonly("support_indices", &fc::SvmModel::support_indices)
      .def_readonly("dual_coefs", &fc::SvmModel::dual_coefs)
      .def_readonly("support_labels", &fc::SvmModel::support_labels)
      .def_readonly("bias", &fc::SvmModel::bias)
      .def_readonly("diag_shift", &fc::SvmModel::diag_shift)
      .def_readonly("training_size", &fc::SvmModel::training_size)
      .def(
          "decision",
          [](const fc::SvmModel& model, const std::vector<double>& kcol) {
            return fc::decision(model, kcol);
          },
          py::arg("kernel_column"),
          "Decision value from kernel evaluations against all training "
          "instances, in training order.")
      .def(
          "predict",
          [](const fc::SvmModel& model, const std::vector<double>& kcol) {
            return fc::predict(model, kcol);
          },
          py::arg("kernel_column"), "Sign of the decision value, as +1 / -1.");

  m.def(
      "min_eigenvalue",
      [](const Rows& gram) { return fc::min_eigenvalue(to_gram(gram)); }, py::arg("gram"),
      "Smallest eigenvalue of a square Gram matrix.");

  m.def(
      "svm_train",
      [](const Rows& gram, const std::vector<int>& labels, double C, double kkt_tol,
         int max_passes, std::uint64_t seed, std::optional<double> diag_shift) {
        fc::SvmConfig cfg;
        cfg.C = C;
        cfg.kkt_tol = kkt_tol;
        cfg.max_passes = max_passes;
        cfg.seed = seed;
        cfg.validate();
        const auto g = to_gram(gram);
        const double shift = diag_shift ? *diag_shift : fc::compute_diag_shift(g);
        return fc::train_svm(g, labels, cfg, shift);
      },
      py::arg("gram"), py::arg("labels"), py::arg("C") = 100.0, py::arg("kkt_tol") = 1e-3,
      py::arg("max_passes") = 10000, py::arg("seed") = 0,
      py::arg("diag_shift") = std::nullopt,
      "Trains a soft-margin SVM on a precomputed Gram matrix and +1/-1 "
      "labels. diag_shift defaults to the smallest shift making the Gram "
      "positive definite.");
}
