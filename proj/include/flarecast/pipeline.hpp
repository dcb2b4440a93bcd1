#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flarecast/eval.hpp"
#include "flarecast/iforest.hpp"
#include "flarecast/mvts.hpp"
#include "flarecast/svm.hpp"
#include "flarecast/tskernel.hpp"

namespace flarecast {

enum class Undersampler { Random, Climatology };

std::string undersampler_name(Undersampler u);
Undersampler parse_undersampler(const std::string& name);

// Full description of one experiment. All randomness downstream derives from
// master_seed, so a config determines its report bit-for-bit.
struct ExperimentConfig {
  BinaryTask task = BinaryTask::xm_vs_cbn();
  // Empty list = keep every parameter present in the data.
  std::vector<std::string> parameters;
  int train_partition = 1;
  std::vector<int> test_partitions = {2, 3, 4, 5};
  std::vector<double> contamination_grid = {0.0,  0.01, 0.02, 0.05, 0.10, 0.15, 0.20,
                                            0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  int n_trials = 10;
  Undersampler undersampler = Undersampler::Climatology;
  KernelConfig kernel;
  SvmConfig svm;
  IForestConfig iforest;
  std::uint64_t master_seed = 0;

  void validate() const;
};

// The five active-region magnetic field parameters used throughout.
const std::vector<std::string>& default_parameters();

// Built-in experiment setups: A is X-vs-quiet with random undersampling,
// B is strong-vs-weak (XM vs CBN) with climatology-preserving undersampling.
ExperimentConfig experiment_a();
ExperimentConfig experiment_b();
ExperimentConfig preset_config(const std::string& name);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Per-trial seed: master_seed xor a mix of the contamination rate's bits and
// the trial index. Shared by sweep cells and standalone trials.
std::uint64_t derive_trial_seed(std::uint64_t master_seed, double contamination,
                                int trial_index);

struct PartitionEval {
  int partition = 0;
  ConfusionMatrix cm;
  double tss = 0.0;
  double hss2 = 0.0;
};

struct TrialResult {
  double contamination = 0.0;
  int trial_index = 0;
  std::uint64_t trial_seed = 0;
  std::vector<std::string> removed_ids;  // flagged outliers, sorted
  std::vector<std::string> train_ids;    // post-undersampling fold, fold order
  std::string normalization_fingerprint;
  std::vector<PartitionEval> tests;  // ordered as cfg.test_partitions
};

// One complete trial at a given contamination rate: outlier removal,
// undersampling, normalization, training, per-partition evaluation.
TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& data, double contamination,
                      int trial_index, int threads = 0);

struct ReportCell {
  double contamination = 0.0;
  int partition = 0;
  TrialAggregate tss;
  TrialAggregate hss2;
  std::vector<ConfusionMatrix> confusions;  // per trial
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string dataset_fingerprint;
  std::string artifact_version;
  std::string variance_convention;  // sample variance, n-1 denominator
  std::string iforest_policy;       // one fit per contamination rate
  std::vector<ReportCell> cells;    // contamination-major, partition-minor
};

// Instance-id bookkeeping for the split audit: which ids each trial trained
// on, which ids each test partition contains, and the fingerprint each
// normalization fit was stamped with.
struct AuditManifest {
  std::string task;
  int train_partition = 1;
  std::size_t n_timesteps = 0;
  std::vector<std::string> param_names;
  std::map<int, std::vector<std::string>> test_ids;
  std::vector<TrialResult> trials;  // tests omitted when serialized
};

struct SweepOutput {
  ExperimentReport report;
  AuditManifest manifest;
};

SweepOutput run_sweep(const ExperimentConfig& cfg, const Dataset& data, int threads = 0);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const AuditManifest& manifest);
AuditManifest manifest_from_json(const nlohmann::json& j);

// CSV rendering of the aggregate cells: one row per contamination rate,
// test partition and metric, with per-trial values in trailing columns.
std::string report_csv(const ExperimentReport& report);

// Writes report.json, report.csv and manifest.json. Byte-stable: identical
// reports serialize to identical files.
void emit_report(const SweepOutput& out, const std::filesystem::path& dir);

// Split hygiene check over an emitted manifest: every trial's training ids
// must be disjoint from every test partition's ids, and each trial's
// normalization stamp must equal the fingerprint recomputed from its
// training fold. Throws ComputeError on any violation.
void audit_manifest(const AuditManifest& manifest);

struct GridSearchSpec {
  std::vector<double> c_values = {1.0, 10.0, 100.0, 1000.0};
  std::vector<double> gamma_values = {0.001, 0.01, 0.1, 1.0};
  std::string objective = "tss";  // or "hss2"
  double holdout_fraction = 0.25;

  void validate() const;
};

GridSearchSpec grid_spec_from_json(const nlohmann::json& j);
nlohmann::json grid_spec_to_json(const GridSearchSpec& spec);

struct GridCell {
  double c = 0.0;
  double gamma = 0.0;
  double objective = 0.0;
  bool defined = false;
};

struct GridSearchResult {
  double best_c = 0.0;
  double best_gamma = 0.0;
  double objective = 0.0;
  std::vector<GridCell> cells;
};

// Hyperparameter selection on the training partition only, at contamination
// zero: undersample once, hold out a seeded stratified quarter, train one
// model per (C, gamma) and keep the argmax of the objective. Ties prefer
// smaller C, then smaller gamma.
GridSearchResult grid_search(const ExperimentConfig& cfg, const GridSearchSpec& spec,
                             const Dataset& data, int threads = 0);

nlohmann::json grid_result_to_json(const GridSearchResult& result);

}  // namespace flarecast
