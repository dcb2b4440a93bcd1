#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flarecast/error.hpp"
#include "flarecast/ingest.hpp"
#include "flarecast/pipeline.hpp"
#include "flarecast/preprocess.hpp"
#include "flarecast/rng.hpp"
#include "flarecast/text.hpp"
#include "flarecast/threading.hpp"
#include "flarecast/version.hpp"

namespace fc = flarecast;

namespace {

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fc::ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw fc::ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fc::ConfigError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw fc::ComputeError("failed writing: " + path.string());
}

// Applies one `key=value` or `a.b=value` override onto a config JSON tree.
// Values parse as JSON when possible and fall back to plain strings, so
// `--set kernel.gamma=0.05` and `--set task=X_VS_N` both work.
void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw fc::ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string key_path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  nlohmann::json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key_path.find('.', start);
    const std::string key = key_path.substr(start, dot - start);
    if (key.empty()) throw fc::ConfigError("override '" + assignment + "' has an empty key");
    if (dot == std::string::npos) {
      nlohmann::json value;
      try {
        value = nlohmann::json::parse(value_text);
      } catch (const nlohmann::json::parse_error&) {
        value = value_text;
      }
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

fc::ExperimentConfig resolve_experiment_config(const std::string& config_path,
                                               const std::string& preset,
                                               const std::vector<std::string>& overrides,
                                               nlohmann::json& echo) {
  if (config_path.empty() == preset.empty()) {
    throw fc::ConfigError("provide exactly one of --config or --preset");
  }
  nlohmann::json base = preset.empty() ? read_json_file(config_path)
                                       : fc::config_to_json(fc::preset_config(preset));
  for (const auto& assignment : overrides) apply_override(base, assignment);
  const fc::ExperimentConfig cfg = fc::config_from_json(base);
  echo = fc::config_to_json(cfg);
  return cfg;
}

nlohmann::json meta_envelope(const std::string& command, int threads) {
  return nlohmann::json{{"artifact_version", fc::kVersion},
                        {"command", command},
                        {"threads", fc::resolve_threads(threads)},
                        {"timestamp_utc", utc_timestamp()}};
}

fc::Dataset load_data(const std::string& dir, int threads, nlohmann::json& meta) {
  fc::LoadStats stats;
  fc::Dataset data = fc::load_data_dir(dir, threads, &stats);
  meta["inputs"]["data"] = dir;
  meta["dataset_fingerprint"] = fc::dataset_fingerprint(data);
  meta["load_stats"] = {{"repaired_cells", stats.repaired_cells},
                        {"repaired_instances", stats.repaired_instances}};
  if (stats.repaired_cells > 0) {
    std::cerr << "note: interpolated " << stats.repaired_cells << " missing cells across "
              << stats.repaired_instances << " instances\n";
  }
  return data;
}

// Per-partition stratified cap for smoke runs on large datasets.
fc::Dataset cap_partitions(const fc::Dataset& data, std::size_t cap, std::uint64_t seed) {
  std::vector<fc::Dataset> parts;
  for (int k : fc::partition_ids(data)) {
    parts.push_back(fc::stratified_cap(fc::slice_partition(data, k), cap,
                                       fc::rng::combine(seed, static_cast<std::uint64_t>(k))));
  }
  return fc::merge(parts);
}

struct ValidateArgs {
  std::string data;
  int threads = 0;
};

void cmd_validate(const ValidateArgs& args) {
  nlohmann::json meta = meta_envelope("validate", args.threads);
  const fc::Dataset data = load_data(args.data, args.threads, meta);
  std::cout << "instances=" << data.size() << " parameters=" << data.n_params()
            << " timesteps=" << data.n_timesteps() << '\n';
  for (int k : fc::partition_ids(data)) {
    const fc::Dataset part = fc::slice_partition(data, k);
    const auto counts = fc::class_counts(part);
    std::cout << "partition " << k << ":";
    for (fc::FlareClass c : fc::kFlareClasses) {
      const auto it = counts.find(c);
      std::cout << ' ' << fc::class_code(c) << '=' << (it == counts.end() ? 0 : it->second);
    }
    std::cout << " total=" << part.size() << '\n';
    for (const auto& task : {fc::BinaryTask::x_vs_n(), fc::BinaryTask::xm_vs_cbn()}) {
      try {
        const double ratio = fc::imbalance_ratio(part, task);
        std::cout << "  " << task.name() << " imbalance " << fc::imbalance_ratio_string(ratio)
                  << " (" << fc::format_double(ratio) << ")\n";
      } catch (const fc::Error&) {
        std::cout << "  " << task.name() << " imbalance undefined (no positives)\n";
      }
    }
  }
}

struct SynthArgs {
  std::string config;
  std::string out;
  int partitions = 1;
  int threads = 0;
};

void cmd_synth(const SynthArgs& args) {
  if (args.partitions < 1) throw fc::ConfigError("--partitions must be >= 1");
  nlohmann::json meta = meta_envelope("synth", args.threads);
  const fc::SynthConfig base = fc::synth_config_from_json(read_json_file(args.config));
  meta["inputs"]["config"] = args.config;
  meta["effective_config"] = fc::synth_config_to_json(base);
  meta["partitions"] = args.partitions;

  std::filesystem::create_directories(args.out);
  nlohmann::json outliers = nlohmann::json::object();
  for (int k = 1; k <= args.partitions; ++k) {
    fc::SynthConfig cfg = base;
    if (k > 1) cfg.seed = fc::rng::combine(base.seed, static_cast<std::uint64_t>(k));
    auto [data, truth] = fc::generate_synthetic(cfg);
    const fc::Dataset labeled = fc::with_partition(data, k);
    fc::write_dataset(labeled, std::filesystem::path(args.out) / ("partition-" + std::to_string(k)));
    outliers[std::to_string(k)] =
        std::vector<std::string>(truth.ids.begin(), truth.ids.end());
  }
  write_json_file(std::filesystem::path(args.out) / "outliers.json", outliers);
  write_json_file(std::filesystem::path(args.out) / "run_meta.json", meta);
  std::cerr << "wrote " << args.partitions << " partition(s) to " << args.out << '\n';
}

struct DetectArgs {
  std::string data;
  std::string out;
  std::string task;
  double contamination = 0.0;
  int partition = 0;
  int trees = 100;
  int subsample = 256;
  std::uint64_t seed = 0;
  int threads = 0;
};

void cmd_detect(const DetectArgs& args) {
  if (!(args.contamination >= 0.0 && args.contamination <= 0.5)) {
    throw fc::ConfigError("--contamination must lie in [0, 0.5]");
  }
  nlohmann::json meta = meta_envelope("detect", args.threads);
  fc::Dataset data = load_data(args.data, args.threads, meta);
  if (args.partition > 0) {
    data = fc::slice_partition(data, args.partition);
    if (data.empty()) {
      throw fc::ConfigError("partition " + std::to_string(args.partition) + " is empty");
    }
  }

  std::vector<const fc::MvtsInstance*> pool;
  if (!args.task.empty()) {
    const fc::BinaryTask task = fc::BinaryTask::from_name(args.task);
    for (const auto& inst : data.instances()) {
      if (task.is_negative(inst.flare_class)) pool.push_back(&inst);
    }
  } else {
    for (const auto& inst : data.instances()) pool.push_back(&inst);
  }
  if (pool.empty()) throw fc::ConfigError("no instances to score after filtering");

  fc::IForestConfig cfg;
  cfg.n_trees = args.trees;
  cfg.subsample_size = args.subsample;
  cfg.contamination = args.contamination;
  cfg.seed = args.seed;
  cfg.validate();

  std::vector<fc::FeatureVector> vectors;
  vectors.reserve(pool.size());
  for (const auto* inst : pool) vectors.push_back(fc::flatten(*inst));
  const auto model = fc::fit_iforest(vectors, cfg, args.threads);

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scored.emplace_back(pool[i]->instance_id, fc::score(model, vectors[i]));
  }
  const auto flags = fc::flag_outliers(scored, args.contamination);

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::string csv = "instance_id,score,flagged\n";
  for (const auto& [id, s] : scored) {
    csv += id + ',' + fc::format_double(s) + ',' + (flags.count(id) ? "1" : "0") + '\n';
  }
  std::filesystem::create_directories(args.out);
  const auto csv_path = std::filesystem::path(args.out) / "scores.csv";
  std::ofstream csv_out(csv_path, std::ios::binary);
  if (!csv_out) throw fc::ConfigError("cannot open for writing: " + csv_path.string());
  csv_out << csv;
  if (!csv_out) throw fc::ComputeError("failed writing: " + csv_path.string());

  meta["effective_config"] = {{"n_trees", cfg.n_trees},
                              {"subsample_size", cfg.subsample_size},
                              {"contamination", cfg.contamination},
                              {"seed", cfg.seed},
                              {"task", args.task.empty() ? nlohmann::json(nullptr)
                                                         : nlohmann::json(args.task)},
                              {"partition", args.partition}};
  meta["flagged"] = flags.size();
  meta["scored"] = scored.size();
  write_json_file(std::filesystem::path(args.out) / "run_meta.json", meta);
  std::cerr << "scored " << scored.size() << " instances, flagged " << flags.size() << '\n';
}

struct SweepArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::size_t subsample = 0;
  int threads = 0;
};

void cmd_sweep(const SweepArgs& args) {
  nlohmann::json meta = meta_envelope("sweep", args.threads);
  nlohmann::json echo;
  const fc::ExperimentConfig cfg =
      resolve_experiment_config(args.config, args.preset, args.overrides, echo);
  meta["inputs"]["config"] = args.config.empty() ? "preset:" + args.preset : args.config;
  meta["overrides"] = args.overrides;
  meta["effective_config"] = echo;

  fc::Dataset data = load_data(args.data, args.threads, meta);
  if (args.subsample > 0) {
    data = cap_partitions(data, args.subsample, cfg.master_seed);
    meta["subsample_cap"] = args.subsample;
  }

  const fc::SweepOutput out = fc::run_sweep(cfg, data, args.threads);
  fc::emit_report(out, args.out);
  write_json_file(std::filesystem::path(args.out) / "run_meta.json", meta);
  std::cerr << "wrote report.json, report.csv, manifest.json to " << args.out << '\n';
}

struct GridArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string preset;
  std::string grid;
  std::vector<std::string> overrides;
  std::size_t subsample = 0;
  int threads = 0;
};

void cmd_gridsearch(const GridArgs& args) {
  nlohmann::json meta = meta_envelope("gridsearch", args.threads);
  nlohmann::json echo;
  const fc::ExperimentConfig cfg =
      resolve_experiment_config(args.config, args.preset, args.overrides, echo);
  meta["inputs"]["config"] = args.config.empty() ? "preset:" + args.preset : args.config;
  meta["overrides"] = args.overrides;
  meta["effective_config"] = echo;

  fc::GridSearchSpec spec;
  if (!args.grid.empty()) {
    spec = fc::grid_spec_from_json(read_json_file(args.grid));
    meta["inputs"]["grid"] = args.grid;
  }
  meta["grid_spec"] = fc::grid_spec_to_json(spec);

  fc::Dataset data = load_data(args.data, args.threads, meta);
  if (args.subsample > 0) {
    data = cap_partitions(data, args.subsample, cfg.master_seed);
    meta["subsample_cap"] = args.subsample;
  }

  const fc::GridSearchResult result = fc::grid_search(cfg, spec, data, args.threads);
  std::filesystem::create_directories(args.out);
  write_json_file(std::filesystem::path(args.out) / "gridsearch.json",
                  fc::grid_result_to_json(result));
  write_json_file(std::filesystem::path(args.out) / "run_meta.json", meta);
  std::cerr << "best C=" << fc::format_double(result.best_c)
            << " gamma=" << fc::format_double(result.best_gamma) << " " << spec.objective
            << "=" << fc::format_double(result.objective) << '\n';
}

struct ReportArgs {
  std::string in;
  std::string out;
  int threads = 0;
};

void cmd_report(const ReportArgs& args) {
  nlohmann::json meta = meta_envelope("report", args.threads);
  meta["inputs"]["report"] = args.in;
  const fc::ExperimentReport report = fc::report_from_json(read_json_file(args.in));
  std::filesystem::create_directories(args.out);
  const auto csv_path = std::filesystem::path(args.out) / "report.csv";
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw fc::ConfigError("cannot open for writing: " + csv_path.string());
  out << fc::report_csv(report);
  if (!out) throw fc::ComputeError("failed writing: " + csv_path.string());
  write_json_file(std::filesystem::path(args.out) / "run_meta.json", meta);
  std::cerr << "wrote " << csv_path.string() << " (" << report.cells.size() << " cells)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solar flare prediction pipeline: time series outlier removal, "
               "kernel SVM training and skill-score sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fc::kVersion));

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Load a dataset and print its shape, "
                                                  "class counts and imbalance ratios");
  validate->add_option("--data", validate_args.data, "Dataset directory")->required();
  validate->add_option("--threads", validate_args.threads, "Worker threads (0 = auto)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset with "
                                            "ground-truth outliers");
  synth->add_option("--config", synth_args.config, "Synthetic config JSON")->required();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--partitions", synth_args.partitions,
                    "Number of partitions to generate (default 1)");
  synth->add_option("--threads", synth_args.threads, "Worker threads (0 = auto)");

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "Score instances with an isolation forest "
                                              "and list flagged outliers");
  detect->add_option("--data", detect_args.data, "Dataset directory")->required();
  detect->add_option("--out", detect_args.out, "Output directory")->required();
  detect->add_option("--contamination", detect_args.contamination,
                     "Fraction to flag, in [0, 0.5] (default 0)");
  detect->add_option("--task", detect_args.task,
                     "Restrict to a task's negative class (X_VS_N or XM_VS_CBN)");
  detect->add_option("--partition", detect_args.partition,
                     "Restrict to one partition (0 = all)");
  detect->add_option("--trees", detect_args.trees, "Number of trees (default 100)");
  detect->add_option("--subsample", detect_args.subsample,
                     "Subsample size per tree (default 256)");
  detect->add_option("--seed", detect_args.seed, "Forest seed (default 0)");
  detect->add_option("--threads", detect_args.threads, "Worker threads (0 = auto)");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Run the full contamination sweep and emit "
                                            "report.json, report.csv and manifest.json");
  sweep->add_option("--data", sweep_args.data, "Dataset directory")->required();
  sweep->add_option("--out", sweep_args.out, "Output directory")->required();
  sweep->add_option("--config", sweep_args.config, "Experiment config JSON");
  sweep->add_option("--preset", sweep_args.preset,
                    "Built-in config: experiment-a or experiment-b");
  sweep->add_option("--set", sweep_args.overrides,
                    "Config override key=value (repeatable, dotted keys allowed)");
  sweep->add_option("--subsample", sweep_args.subsample,
                    "Stratified per-partition cap for smoke runs (0 = off)");
  sweep->add_option("--threads", sweep_args.threads, "Worker threads (0 = auto)");

  GridArgs grid_args;
  auto* gridsearch = app.add_subcommand("gridsearch", "Select (C, gamma) on a stratified "
                                                      "holdout of the training partition");
  gridsearch->add_option("--data", grid_args.data, "Dataset directory")->required();
  gridsearch->add_option("--out", grid_args.out, "Output directory")->required();
  gridsearch->add_option("--config", grid_args.config, "Experiment config JSON");
  gridsearch->add_option("--preset", grid_args.preset,
                         "Built-in config: experiment-a or experiment-b");
  gridsearch->add_option("--grid", grid_args.grid, "Grid spec JSON (candidate C and gamma)");
  gridsearch->add_option("--set", grid_args.overrides,
                         "Config override key=value (repeatable)");
  gridsearch->add_option("--subsample", grid_args.subsample,
                         "Stratified per-partition cap for smoke runs (0 = off)");
  gridsearch->add_option("--threads", grid_args.threads, "Worker threads (0 = auto)");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Re-emit the CSV view of an existing "
                                              "report.json");
  report->add_option("--in", report_args.in, "Existing report.json")->required();
  report->add_option("--out", report_args.out, "Output directory")->required();
  report->add_option("--threads", report_args.threads, "Worker threads (0 = auto)");

  validate->callback([&] { cmd_validate(validate_args); });
  synth->callback([&] { cmd_synth(synth_args); });
  detect->callback([&] { cmd_detect(detect_args); });
  sweep->callback([&] { cmd_sweep(sweep_args); });
  gridsearch->callback([&] { cmd_gridsearch(grid_args); });
  report->callback([&] { cmd_report(report_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const fc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
