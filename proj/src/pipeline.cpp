#include "flarecast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "flarecast/error.hpp"
#include "flarecast/preprocess.hpp"
#include "flarecast/rng.hpp"
#include "flarecast/text.hpp"
#include "flarecast/version.hpp"

namespace flarecast {

std::string undersampler_name(Undersampler u) {
  return u == Undersampler::Random ? "random" : "climatology";
}

Undersampler parse_undersampler(const std::string& name) {
  if (name == "random") return Undersampler::Random;
  if (name == "climatology") return Undersampler::Climatology;
  throw ConfigError("unknown undersampler '" + name + "' (expected random or climatology)");
}

void ExperimentConfig::validate() const {
  if (train_partition < 1) throw ConfigError("train_partition must be >= 1");
  if (test_partitions.empty()) throw ConfigError("test_partitions must be nonempty");
  std::set<int> seen;
  for (int k : test_partitions) {
    if (k < 1) throw ConfigError("test partition ids must be >= 1");
    if (k == train_partition) {
      throw ConfigError("train partition " + std::to_string(k) +
                        " may not appear in test_partitions");
    }
    if (!seen.insert(k).second) {
      throw ConfigError("duplicate test partition " + std::to_string(k));
    }
  }
  if (contamination_grid.empty()) throw ConfigError("contamination_grid must be nonempty");
  if (contamination_grid.front() != 0.0) {
    throw ConfigError("contamination_grid must contain 0 as its first entry");
  }
  for (std::size_t i = 0; i < contamination_grid.size(); ++i) {
    const double r = contamination_grid[i];
    if (!(r >= 0.0 && r <= 0.5)) {
      throw ConfigError("contamination rates must lie in [0, 0.5]");
    }
    if (i > 0 && !(contamination_grid[i - 1] < r)) {
      throw ConfigError("contamination_grid must be strictly ascending");
    }
  }
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  kernel.validate();
  svm.validate();
  iforest.validate();
}

const std::vector<std::string>& default_parameters() {
  static const std::vector<std::string> names = {"TOTUSJH", "TOTBSQ", "TOTPOT", "TOTUSJZ",
                                                 "ABSNJZH"};
  return names;
}

ExperimentConfig experiment_a() {
  ExperimentConfig cfg;
  cfg.task = BinaryTask::x_vs_n();
  cfg.parameters = default_parameters();
  cfg.undersampler = Undersampler::Random;
  return cfg;
}

ExperimentConfig experiment_b() {
  ExperimentConfig cfg;
  cfg.task = BinaryTask::xm_vs_cbn();
  cfg.parameters = default_parameters();
  cfg.undersampler = Undersampler::Climatology;
  return cfg;
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "experiment-a") return experiment_a();
  if (name == "experiment-b") return experiment_b();
  throw ConfigError("unknown preset '" + name +
                    "' (expected experiment-a or experiment-b)");
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown " + where + " key '" + key + "'");
    }
  }
}

KernelConfig kernel_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"kind", "gamma", "normalize", "band_width"}, "kernel config");
  KernelConfig cfg;
  if (j.contains("kind")) cfg.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("normalize")) cfg.normalize = j.at("normalize").get<bool>();
  if (j.contains("band_width") && !j.at("band_width").is_null()) {
    cfg.band_width = j.at("band_width").get<int>();
  }
  cfg.validate();
  return cfg;
}

nlohmann::json kernel_to_json(const KernelConfig& cfg) {
  nlohmann::json j{{"kind", kernel_kind_name(cfg.kind)},
                   {"gamma", cfg.gamma},
                   {"normalize", cfg.normalize},
                   {"band_width", nullptr}};
  if (cfg.band_width) j["band_width"] = *cfg.band_width;
  return j;
}

SvmConfig svm_from_json_cfg(const nlohmann::json& j) {
  reject_unknown_keys(j, {"C", "kkt_tol", "max_passes", "seed"}, "svm config");
  SvmConfig cfg;
  if (j.contains("C")) cfg.C = j.at("C").get<double>();
  if (j.contains("kkt_tol")) cfg.kkt_tol = j.at("kkt_tol").get<double>();
  if (j.contains("max_passes")) cfg.max_passes = j.at("max_passes").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json svm_cfg_to_json(const SvmConfig& cfg) {
  return nlohmann::json{{"C", cfg.C},
                        {"kkt_tol", cfg.kkt_tol},
                        {"max_passes", cfg.max_passes},
                        {"seed", cfg.seed}};
}

IForestConfig iforest_from_json_cfg(const nlohmann::json& j) {
  if (j.contains("contamination")) {
    throw ConfigError(
        "iforest contamination is driven by the sweep's contamination_grid; remove it "
        "from the iforest block");
  }
  reject_unknown_keys(j, {"n_trees", "subsample_size", "seed"}, "iforest config");
  IForestConfig cfg;
  if (j.contains("n_trees")) cfg.n_trees = j.at("n_trees").get<int>();
  if (j.contains("subsample_size")) cfg.subsample_size = j.at("subsample_size").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json iforest_cfg_to_json(const IForestConfig& cfg) {
  return nlohmann::json{{"n_trees", cfg.n_trees},
                        {"subsample_size", cfg.subsample_size},
                        {"seed", cfg.seed}};
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  reject_unknown_keys(j,
                      {"task", "parameters", "train_partition", "test_partitions",
                       "contamination_grid", "n_trials", "undersampler", "kernel", "svm",
                       "iforest", "master_seed"},
                      "experiment config");
  ExperimentConfig cfg;
  cfg.parameters = default_parameters();
  if (j.contains("task")) cfg.task = BinaryTask::from_name(j.at("task").get<std::string>());
  if (j.contains("parameters")) {
    cfg.parameters = j.at("parameters").get<std::vector<std::string>>();
  }
  if (j.contains("train_partition")) cfg.train_partition = j.at("train_partition").get<int>();
  if (j.contains("test_partitions")) {
    cfg.test_partitions = j.at("test_partitions").get<std::vector<int>>();
  }
  if (j.contains("contamination_grid")) {
    cfg.contamination_grid = j.at("contamination_grid").get<std::vector<double>>();
  }
  if (j.contains("n_trials")) cfg.n_trials = j.at("n_trials").get<int>();
  if (j.contains("undersampler")) {
    cfg.undersampler = parse_undersampler(j.at("undersampler").get<std::string>());
  }
  if (j.contains("kernel")) cfg.kernel = kernel_from_json(j.at("kernel"));
  if (j.contains("svm")) cfg.svm = svm_from_json_cfg(j.at("svm"));
  if (j.contains("iforest")) cfg.iforest = iforest_from_json_cfg(j.at("iforest"));
  if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return nlohmann::json{{"task", std::string(cfg.task.name())},
                        {"parameters", cfg.parameters},
                        {"train_partition", cfg.train_partition},
                        {"test_partitions", cfg.test_partitions},
                        {"contamination_grid", cfg.contamination_grid},
                        {"n_trials", cfg.n_trials},
                        {"undersampler", undersampler_name(cfg.undersampler)},
                        {"kernel", kernel_to_json(cfg.kernel)},
                        {"svm", svm_cfg_to_json(cfg.svm)},
                        {"iforest", iforest_cfg_to_json(cfg.iforest)},
                        {"master_seed", cfg.master_seed}};
}

std::uint64_t derive_trial_seed(std::uint64_t master_seed, double contamination,
                                int trial_index) {
  return master_seed ^ rng::combine(rng::double_bits(contamination),
                                    static_cast<std::uint64_t>(trial_index));
}

namespace {

// Rethrows any library error with the failing pipeline stage prepended,
// preserving the config-vs-compute distinction for exit codes.
template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + std::string(name) + "] " + e.what());
  } catch (const ComputeError& e) {
    throw ComputeError("[" + std::string(name) + "] " + e.what());
  } catch (const Error& e) {
    throw ComputeError("[" + std::string(name) + "] " + e.what());
  }
}

// Inputs shared by every trial of a sweep: task-filtered splits and the
// anomaly score of each non-flaring training instance. The forest depends
// only on the training data and the master seed, so it is fitted once; each
// contamination rate merely flags a different count.
struct TrialContext {
  Dataset selected;
  Dataset train;
  std::vector<std::pair<std::string, double>> negative_scores;
  std::map<int, Dataset> tests;
};

TrialContext build_context(const ExperimentConfig& cfg, const Dataset& data, int threads) {
  cfg.validate();
  TrialContext ctx;
  ctx.selected = stage("select-parameters", [&] {
    return cfg.parameters.empty() ? data : select_parameters(data, cfg.parameters);
  });

  ctx.train = stage("filter-train", [&] {
    Dataset train = filter_task(slice_partition(ctx.selected, cfg.train_partition), cfg.task);
    if (train.empty()) {
      throw ConfigError("train partition " + std::to_string(cfg.train_partition) +
                        " has no instances for task " + std::string(cfg.task.name()));
    }
    if (count_label(train, cfg.task, BinaryLabel::positive) == 0 ||
        count_label(train, cfg.task, BinaryLabel::negative) == 0) {
      throw ConfigError("train partition must contain both task classes");
    }
    return train;
  });

  stage("outlier-scores", [&] {
    std::vector<FeatureVector> vectors;
    std::vector<std::string> ids;
    for (const auto& inst : ctx.train.instances()) {
      if (cfg.task.is_negative(inst.flare_class)) {
        vectors.push_back(flatten(inst));
        ids.push_back(inst.instance_id);
      }
    }
    IForestConfig fc = cfg.iforest;
    fc.contamination = 0.0;
    fc.seed = rng::combine(cfg.master_seed, rng::combine(0x69666f72657374ull, cfg.iforest.seed));
    const auto forest = fit_iforest(vectors, fc, threads);
    ctx.negative_scores.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ctx.negative_scores.emplace_back(ids[i], score(forest, vectors[i]));
    }
    return 0;
  });

  for (int k : cfg.test_partitions) {
    ctx.tests[k] = stage("filter-test", [&] {
      Dataset test = filter_task(slice_partition(ctx.selected, k), cfg.task);
      if (test.empty()) {
        throw ConfigError("test partition " + std::to_string(k) +
                          " has no instances for task " + std::string(cfg.task.name()));
      }
      return test;
    });
  }
  return ctx;
}

std::vector<double> gram_row(const GramMatrix& g, std::size_t i) {
  std::vector<double> row(g.cols);
  for (std::size_t j = 0; j < g.cols; ++j) row[j] = g(i, j);
  return row;
}

TrialResult run_trial_impl(const ExperimentConfig& cfg, const TrialContext& ctx,
                           double contamination, int trial_index, int threads) {
  TrialResult result;
  result.contamination = contamination;
  result.trial_index = trial_index;
  result.trial_seed = derive_trial_seed(cfg.master_seed, contamination, trial_index);

  const auto flags = stage("flag-outliers", [&] {
    return flag_outliers(ctx.negative_scores, contamination);
  });
  result.removed_ids.assign(flags.begin(), flags.end());

  const Dataset kept = stage("remove-outliers", [&] {
    std::vector<MvtsInstance> instances;
    instances.reserve(ctx.train.size());
    for (const auto& inst : ctx.train.instances()) {
      if (!flags.count(inst.instance_id)) instances.push_back(inst);
    }
    return Dataset(std::move(instances));
  });

  const Dataset fold = stage("undersample", [&] {
    return cfg.undersampler == Undersampler::Random
               ? undersample_random(kept, cfg.task, result.trial_seed)
               : undersample_climatology(kept, cfg.task, result.trial_seed);
  });
  for (const auto& inst : fold.instances()) result.train_ids.push_back(inst.instance_id);

  const NormalizationStats stats = stage("normalize", [&] { return fit_minmax(fold); });
  result.normalization_fingerprint = stats.fitted_on;
  const Dataset fold_n = stage("normalize", [&] { return apply_minmax(fold, stats); });

  const GramMatrix gram_train =
      stage("train-gram", [&] { return gram_self(fold_n, cfg.kernel, threads); });
  const double shift = cfg.kernel.kind == KernelKind::DtwRbf
                           ? stage("psd-shift", [&] { return compute_diag_shift(gram_train); })
                           : 0.0;

  std::vector<int> labels;
  labels.reserve(fold_n.size());
  for (const auto& inst : fold_n.instances()) {
    labels.push_back(label_sign(instance_label(inst, cfg.task)));
  }
  SvmConfig svm_cfg = cfg.svm;
  svm_cfg.seed = rng::combine(result.trial_seed, cfg.svm.seed);
  const SvmModel model =
      stage("svm-train", [&] { return train_svm(gram_train, labels, svm_cfg, shift); });

  for (int k : cfg.test_partitions) {
    const Dataset& test = ctx.tests.at(k);
    const Dataset test_n =
        stage("normalize-test", [&] { return apply_minmax(test, stats); });
    const GramMatrix cross =
        stage("test-gram", [&] { return gram(test_n, fold_n, cfg.kernel, threads); });
    PartitionEval eval;
    eval.partition = k;
    std::vector<int> preds(test_n.size());
    std::vector<int> truths(test_n.size());
    for (std::size_t i = 0; i < test_n.size(); ++i) {
      preds[i] = predict(model, gram_row(cross, i));
      truths[i] = label_sign(instance_label(test_n.instances()[i], cfg.task));
    }
    stage("score", [&] {
      eval.cm = confusion(preds, truths);
      eval.tss = tss(eval.cm);
      eval.hss2 = hss2(eval.cm);
      return 0;
    });
    result.tests.push_back(std::move(eval));
  }
  return result;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& data, double contamination,
                      int trial_index, int threads) {
  if (!(contamination >= 0.0 && contamination <= 0.5)) {
    throw ConfigError("contamination must lie in [0, 0.5]");
  }
  if (trial_index < 0) throw ConfigError("trial_index must be >= 0");
  const TrialContext ctx = build_context(cfg, data, threads);
  return run_trial_impl(cfg, ctx, contamination, trial_index, threads);
}

SweepOutput run_sweep(const ExperimentConfig& cfg, const Dataset& data, int threads) {
  const TrialContext ctx = build_context(cfg, data, threads);

  SweepOutput out;
  out.report.config = cfg;
  out.report.dataset_fingerprint = dataset_fingerprint(ctx.selected);
  out.report.artifact_version = kVersion;
  out.report.variance_convention = "sample variance (n-1 denominator)";
  out.report.iforest_policy =
      "one isolation forest fit per contamination rate; trials rerun undersampling and "
      "normalization only";

  out.manifest.task = std::string(cfg.task.name());
  out.manifest.train_partition = cfg.train_partition;
  out.manifest.n_timesteps = ctx.selected.n_timesteps();
  out.manifest.param_names = ctx.selected.param_names();
  for (const auto& [k, test] : ctx.tests) {
    auto& ids = out.manifest.test_ids[k];
    ids.reserve(test.size());
    for (const auto& inst : test.instances()) ids.push_back(inst.instance_id);
  }

  for (double r : cfg.contamination_grid) {
    std::vector<TrialResult> trials;
    trials.reserve(static_cast<std::size_t>(cfg.n_trials));
    for (int t = 0; t < cfg.n_trials; ++t) {
      trials.push_back(run_trial_impl(cfg, ctx, r, t, threads));
    }
    for (std::size_t ki = 0; ki < cfg.test_partitions.size(); ++ki) {
      ReportCell cell;
      cell.contamination = r;
      cell.partition = cfg.test_partitions[ki];
      std::vector<double> tss_values;
      std::vector<double> hss2_values;
      for (const auto& trial : trials) {
        const PartitionEval& eval = trial.tests[ki];
        tss_values.push_back(eval.tss);
        hss2_values.push_back(eval.hss2);
        cell.confusions.push_back(eval.cm);
      }
      cell.tss = aggregate(tss_values);
      cell.hss2 = aggregate(hss2_values);
      out.report.cells.push_back(std::move(cell));
    }
    for (auto& trial : trials) {
      trial.tests.clear();  // cells carry the scores; the manifest tracks ids
      out.manifest.trials.push_back(std::move(trial));
    }
  }
  return out;
}

namespace {

nlohmann::json aggregate_to_json(const TrialAggregate& agg) {
  return nlohmann::json{{"mean", agg.mean}, {"variance", agg.variance},
                        {"values", agg.values}};
}

TrialAggregate aggregate_from_json(const nlohmann::json& j) {
  TrialAggregate agg;
  agg.mean = j.at("mean").get<double>();
  agg.variance = j.at("variance").get<double>();
  agg.values = j.at("values").get<std::vector<double>>();
  return agg;
}

nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
  return nlohmann::json{{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix cm;
  cm.tp = j.at("tp").get<long long>();
  cm.fp = j.at("fp").get<long long>();
  cm.fn = j.at("fn").get<long long>();
  cm.tn = j.at("tn").get<long long>();
  return cm;
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : report.cells) {
    nlohmann::json confusions = nlohmann::json::array();
    for (const auto& cm : cell.confusions) confusions.push_back(confusion_to_json(cm));
    cells.push_back(nlohmann::json{{"contamination", cell.contamination},
                                   {"partition", cell.partition},
                                   {"tss", aggregate_to_json(cell.tss)},
                                   {"hss2", aggregate_to_json(cell.hss2)},
                                   {"confusions", confusions}});
  }
  return nlohmann::json{{"artifact_version", report.artifact_version},
                        {"config", config_to_json(report.config)},
                        {"dataset_fingerprint", report.dataset_fingerprint},
                        {"variance_convention", report.variance_convention},
                        {"iforest_policy", report.iforest_policy},
                        {"cells", cells}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  report.artifact_version = j.at("artifact_version").get<std::string>();
  report.config = config_from_json(j.at("config"));
  report.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  report.variance_convention = j.at("variance_convention").get<std::string>();
  report.iforest_policy = j.at("iforest_policy").get<std::string>();
  for (const auto& cj : j.at("cells")) {
    ReportCell cell;
    cell.contamination = cj.at("contamination").get<double>();
    cell.partition = cj.at("partition").get<int>();
    cell.tss = aggregate_from_json(cj.at("tss"));
    cell.hss2 = aggregate_from_json(cj.at("hss2"));
    for (const auto& cmj : cj.at("confusions")) {
      cell.confusions.push_back(confusion_from_json(cmj));
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

nlohmann::json manifest_to_json(const AuditManifest& manifest) {
  nlohmann::json test_ids = nlohmann::json::object();
  for (const auto& [k, ids] : manifest.test_ids) test_ids[std::to_string(k)] = ids;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& trial : manifest.trials) {
    trials.push_back(
        nlohmann::json{{"contamination", trial.contamination},
                       {"trial_index", trial.trial_index},
                       {"trial_seed", trial.trial_seed},
                       {"removed_ids", trial.removed_ids},
                       {"train_ids", trial.train_ids},
                       {"normalization_fingerprint", trial.normalization_fingerprint}});
  }
  return nlohmann::json{{"task", manifest.task},
                        {"train_partition", manifest.train_partition},
                        {"n_timesteps", manifest.n_timesteps},
                        {"param_names", manifest.param_names},
                        {"test_ids", test_ids},
                        {"trials", trials}};
}

AuditManifest manifest_from_json(const nlohmann::json& j) {
  AuditManifest manifest;
  manifest.task = j.at("task").get<std::string>();
  manifest.train_partition = j.at("train_partition").get<int>();
  manifest.n_timesteps = j.at("n_timesteps").get<std::size_t>();
  manifest.param_names = j.at("param_names").get<std::vector<std::string>>();
  for (const auto& [key, ids] : j.at("test_ids").items()) {
    manifest.test_ids[std::stoi(key)] = ids.get<std::vector<std::string>>();
  }
  for (const auto& tj : j.at("trials")) {
    TrialResult trial;
    trial.contamination = tj.at("contamination").get<double>();
    trial.trial_index = tj.at("trial_index").get<int>();
    trial.trial_seed = tj.at("trial_seed").get<std::uint64_t>();
    trial.removed_ids = tj.at("removed_ids").get<std::vector<std::string>>();
    trial.train_ids = tj.at("train_ids").get<std::vector<std::string>>();
    trial.normalization_fingerprint = tj.at("normalization_fingerprint").get<std::string>();
    manifest.trials.push_back(std::move(trial));
  }
  return manifest;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = "contamination,partition,metric,mean,variance";
  const std::size_t n_trials = report.cells.empty() ? 0 : report.cells[0].tss.values.size();
  for (std::size_t t = 0; t < n_trials; ++t) {
    out += ",trial_" + std::to_string(t + 1);
  }
  out += '\n';
  const auto row = [&](const ReportCell& cell, const char* metric,
                       const TrialAggregate& agg) {
    out += format_double(cell.contamination);
    out += ',' + std::to_string(cell.partition);
    out += ',';
    out += metric;
    out += ',' + format_double(agg.mean) + ',' + format_double(agg.variance);
    for (double v : agg.values) out += ',' + format_double(v);
    out += '\n';
  };
  for (const auto& cell : report.cells) {
    row(cell, "tss", cell.tss);
    row(cell, "hss2", cell.hss2);
  }
  return out;
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << body;
  if (!out) throw ComputeError("failed writing: " + path.string());
}

}  // namespace

void emit_report(const SweepOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", report_to_json(out.report).dump(2) + "\n");
  write_text_file(dir / "report.csv", report_csv(out.report));
  write_text_file(dir / "manifest.json", manifest_to_json(out.manifest).dump(2) + "\n");
}

void audit_manifest(const AuditManifest& manifest) {
  std::map<int, std::unordered_set<std::string>> test_sets;
  for (const auto& [k, ids] : manifest.test_ids) {
    test_sets[k] = std::unordered_set<std::string>(ids.begin(), ids.end());
  }
  for (const auto& trial : manifest.trials) {
    const std::unordered_set<std::string> removed(trial.removed_ids.begin(),
                                                  trial.removed_ids.end());
    for (const auto& id : trial.train_ids) {
      for (const auto& [k, test_set] : test_sets) {
        if (test_set.count(id)) {
          throw ComputeError("split violation: training id '" + id +
                             "' appears in test partition " + std::to_string(k) +
                             " (trial " + std::to_string(trial.trial_index) +
                             ", contamination " + format_double(trial.contamination) + ")");
        }
      }
      if (removed.count(id)) {
        throw ComputeError("removed outlier '" + id + "' re-entered the training fold");
      }
    }
    const std::string expected = dataset_fingerprint_parts(
        manifest.n_timesteps, manifest.param_names, trial.train_ids);
    if (expected != trial.normalization_fingerprint) {
      throw ComputeError(
          "normalization stats for trial " + std::to_string(trial.trial_index) +
          " at contamination " + format_double(trial.contamination) +
          " were not fitted on the recorded training fold (stamp " +
          trial.normalization_fingerprint + ", expected " + expected + ")");
    }
  }
}

void GridSearchSpec::validate() const {
  if (c_values.empty()) throw ConfigError("grid search needs at least one C value");
  if (gamma_values.empty()) throw ConfigError("grid search needs at least one gamma value");
  for (double c : c_values) {
    if (!(c > 0.0)) throw ConfigError("grid C values must be > 0");
  }
  for (double g : gamma_values) {
    if (!(g > 0.0)) throw ConfigError("grid gamma values must be > 0");
  }
  if (objective != "tss" && objective != "hss2") {
    throw ConfigError("grid objective must be tss or hss2");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction <= 0.5)) {
    throw ConfigError("holdout_fraction must lie in (0, 0.5]");
  }
}

GridSearchSpec grid_spec_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"c_values", "gamma_values", "objective", "holdout_fraction"},
                      "grid search spec");
  GridSearchSpec spec;
  if (j.contains("c_values")) spec.c_values = j.at("c_values").get<std::vector<double>>();
  if (j.contains("gamma_values")) {
    spec.gamma_values = j.at("gamma_values").get<std::vector<double>>();
  }
  if (j.contains("objective")) spec.objective = j.at("objective").get<std::string>();
  if (j.contains("holdout_fraction")) {
    spec.holdout_fraction = j.at("holdout_fraction").get<double>();
  }
  spec.validate();
  return spec;
}

nlohmann::json grid_spec_to_json(const GridSearchSpec& spec) {
  return nlohmann::json{{"c_values", spec.c_values},
                        {"gamma_values", spec.gamma_values},
                        {"objective", spec.objective},
                        {"holdout_fraction", spec.holdout_fraction}};
}

GridSearchResult grid_search(const ExperimentConfig& cfg, const GridSearchSpec& spec,
                             const Dataset& data, int threads) {
  cfg.validate();
  spec.validate();

  const Dataset selected =
      cfg.parameters.empty() ? data : select_parameters(data, cfg.parameters);
  Dataset train = filter_task(slice_partition(selected, cfg.train_partition), cfg.task);
  if (train.empty()) {
    throw ConfigError("train partition " + std::to_string(cfg.train_partition) +
                      " has no instances for task " + std::string(cfg.task.name()));
  }

  // Grid search always runs at contamination zero: no outlier removal.
  const std::uint64_t seed = rng::combine(cfg.master_seed, 0x67726964736561ull);
  const Dataset fold = cfg.undersampler == Undersampler::Random
                           ? undersample_random(train, cfg.task, seed)
                           : undersample_climatology(train, cfg.task, seed);

  // Seeded stratified holdout: the same fraction of each class, at least one
  // instance held out and one retained per class.
  std::vector<std::size_t> pos_idx;
  std::vector<std::size_t> neg_idx;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (instance_label(fold.instances()[i], cfg.task) == BinaryLabel::positive) {
      pos_idx.push_back(i);
    } else {
      neg_idx.push_back(i);
    }
  }
  const auto hold_count = [&](std::size_t n, const char* side) {
    if (n < 2) {
      throw ConfigError(std::string("too few ") + side +
                        " instances for a stratified holdout (need >= 2)");
    }
    const auto k = static_cast<std::size_t>(
        std::floor(spec.holdout_fraction * static_cast<double>(n) + 0.5));
    return std::min(std::max<std::size_t>(k, 1), n - 1);
  };
  rng::Engine eng(rng::combine(seed, 0x686f6c646f7574ull));
  std::unordered_set<std::size_t> held;
  for (const auto* group : {&pos_idx, &neg_idx}) {
    const std::size_t k =
        hold_count(group->size(), group == &pos_idx ? "positive" : "negative");
    for (std::size_t pick : rng::sample_without_replacement(eng, group->size(), k)) {
      held.insert((*group)[pick]);
    }
  }
  std::vector<MvtsInstance> train_side;
  std::vector<MvtsInstance> hold_side;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    (held.count(i) ? hold_side : train_side).push_back(fold.instances()[i]);
  }
  const Dataset train_fold{std::move(train_side)};
  const Dataset hold_fold{std::move(hold_side)};

  const NormalizationStats stats = fit_minmax(train_fold);
  const Dataset train_n = apply_minmax(train_fold, stats);
  const Dataset hold_n = apply_minmax(hold_fold, stats);

  std::vector<int> labels;
  for (const auto& inst : train_n.instances()) {
    labels.push_back(label_sign(instance_label(inst, cfg.task)));
  }
  std::vector<int> truths;
  for (const auto& inst : hold_n.instances()) {
    truths.push_back(label_sign(instance_label(inst, cfg.task)));
  }

  std::vector<double> c_values = spec.c_values;
  std::vector<double> gamma_values = spec.gamma_values;
  std::sort(c_values.begin(), c_values.end());
  c_values.erase(std::unique(c_values.begin(), c_values.end()), c_values.end());
  std::sort(gamma_values.begin(), gamma_values.end());
  gamma_values.erase(std::unique(gamma_values.begin(), gamma_values.end()),
                     gamma_values.end());

  GridSearchResult result;
  bool have_best = false;
  for (double gamma : gamma_values) {
    KernelConfig kc = cfg.kernel;
    kc.gamma = gamma;
    const GramMatrix gram_train = gram_self(train_n, kc, threads);
    const GramMatrix cross = gram(hold_n, train_n, kc, threads);
    const double shift =
        kc.kind == KernelKind::DtwRbf ? compute_diag_shift(gram_train) : 0.0;
    for (double c : c_values) {
      GridCell cell;
      cell.c = c;
      cell.gamma = gamma;
      SvmConfig sc = cfg.svm;
      sc.C = c;
      sc.seed = rng::combine(seed, rng::combine(rng::double_bits(c), rng::double_bits(gamma)));
      try {
        const SvmModel model = train_svm(gram_train, labels, sc, shift);
        std::vector<int> preds(hold_n.size());
        for (std::size_t i = 0; i < hold_n.size(); ++i) {
          preds[i] = predict(model, gram_row(cross, i));
        }
        const ConfusionMatrix cm = confusion(preds, truths);
        cell.objective = spec.objective == "tss" ? tss(cm) : hss2(cm);
        cell.defined = true;
      } catch (const ComputeError&) {
        cell.defined = false;
      }
      result.cells.push_back(cell);
      if (cell.defined) {
        const bool better =
            !have_best || cell.objective > result.objective ||
            (cell.objective == result.objective &&
             (cell.c < result.best_c ||
              (cell.c == result.best_c && cell.gamma < result.best_gamma)));
        if (better) {
          result.best_c = cell.c;
          result.best_gamma = cell.gamma;
          result.objective = cell.objective;
          have_best = true;
        }
      }
    }
  }
  if (!have_best) {
    throw ComputeError("grid search objective was undefined for every (C, gamma) cell");
  }
  return result;
}

nlohmann::json grid_result_to_json(const GridSearchResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json cj{{"c", cell.c}, {"gamma", cell.gamma}, {"defined", cell.defined}};
    cj["objective"] = cell.defined ? nlohmann::json(cell.objective) : nlohmann::json(nullptr);
    cells.push_back(std::move(cj));
  }
  return nlohmann::json{{"best_c", result.best_c},
                        {"best_gamma", result.best_gamma},
                        {"objective", result.objective},
                        {"cells", cells}};
}

}  // namespace flarecast
