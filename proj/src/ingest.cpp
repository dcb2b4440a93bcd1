#include "flarecast/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "flarecast/error.hpp"
#include "flarecast/rng.hpp"
#include "flarecast/text.hpp"
#include "flarecast/threading.hpp"

namespace flarecast {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool safe_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '-';
  });
}

std::vector<std::string> read_lines_as(const std::filesystem::path& path,
                                       const std::string& instance_id) {
  try {
    return read_lines(path.string());
  } catch (const Error&) {
    throw FileReadError("cannot read file '" + path.string() + "' for instance '" +
                        instance_id + "'");
  }
}

// Fills NaN gaps in one parameter series: interior gaps linearly interpolate
// between the nearest finite neighbors, boundary gaps copy the nearest
// finite value. Returns false when the row has no finite value.
bool repair_series(double* v, std::size_t t_count, std::size_t& repaired) {
  std::vector<std::size_t> finite;
  for (std::size_t t = 0; t < t_count; ++t) {
    if (std::isfinite(v[t])) finite.push_back(t);
  }
  if (finite.empty()) return false;
  repaired += t_count - finite.size();
  for (std::size_t t = 0; t < finite.front(); ++t) v[t] = v[finite.front()];
  for (std::size_t t = finite.back() + 1; t < t_count; ++t) v[t] = v[finite.back()];
  for (std::size_t k = 0; k + 1 < finite.size(); ++k) {
    const std::size_t a = finite[k];
    const std::size_t b = finite[k + 1];
    for (std::size_t t = a + 1; t < b; ++t) {
      const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
      v[t] = v[a] + (v[b] - v[a]) * w;
    }
  }
  return true;
}

MvtsInstance load_instance(const std::filesystem::path& file, const ManifestEntry& entry,
                           int partition_id, std::size_t& repaired) {
  const auto lines = read_lines_as(file, entry.instance_id);
  if (lines.empty()) {
    throw CsvFormatError("instance '" + entry.instance_id + "': file is empty");
  }
  const auto header = split_csv_line(lines[0]);
  if (header.empty() || header[0].empty()) {
    throw CsvFormatError("instance '" + entry.instance_id + "': missing header row");
  }
  const std::size_t p_count = header.size();
  const std::size_t t_count = lines.size() - 1;
  if (t_count == 0) {
    throw CsvFormatError("instance '" + entry.instance_id + "': no data rows");
  }

  Matrix values(p_count, t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto cells = split_csv_line(lines[t + 1]);
    if (cells.size() != p_count) {
      throw CsvFormatError("instance '" + entry.instance_id + "': row " +
                           std::to_string(t + 2) + " has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(p_count));
    }
    for (std::size_t p = 0; p < p_count; ++p) {
      if (cells[p].empty()) {
        values(p, t) = kMissing;
        continue;
      }
      const auto parsed = parse_double(cells[p]);
      if (!parsed || !std::isfinite(*parsed)) {
        throw CsvFormatError("instance '" + entry.instance_id + "': cell '" + cells[p] +
                             "' at row " + std::to_string(t + 2) + " is not a finite number");
      }
      values(p, t) = *parsed;
    }
  }
  for (std::size_t p = 0; p < p_count; ++p) {
    if (!repair_series(&values(p, 0), t_count, repaired)) {
      throw MissingDataError("instance '" + entry.instance_id + "': parameter '" +
                             header[p] + "' has no finite values");
    }
  }

  MvtsInstance inst;
  inst.instance_id = entry.instance_id;
  inst.flare_class = entry.flare_class;
  inst.partition_id = partition_id;
  inst.param_names = header;
  inst.values = std::move(values);
  return inst;
}

}  // namespace

PartitionManifest read_manifest(const std::filesystem::path& path, int partition_id) {
  if (!std::filesystem::exists(path)) {
    throw FileReadError("manifest not found: " + path.string());
  }
  const auto lines = read_lines(path.string());
  if (lines.empty() || split_csv_line(lines[0]) !=
                           std::vector<std::string>{"instance_id", "flare_class", "path"}) {
    throw CsvFormatError("manifest '" + path.string() +
                         "' must start with header instance_id,flare_class,path");
  }
  PartitionManifest manifest;
  manifest.partition_id = partition_id;
  std::set<std::string> seen;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto cells = split_csv_line(lines[k]);
    if (cells.size() != 3) {
      throw CsvFormatError("manifest '" + path.string() + "': line " + std::to_string(k + 1) +
                           " has " + std::to_string(cells.size()) + " cells, expected 3");
    }
    if (!seen.insert(cells[0]).second) {
      throw CsvFormatError("manifest '" + path.string() + "': duplicate instance_id '" +
                           cells[0] + "'");
    }
    manifest.entries.push_back({cells[0], parse_flare_class(cells[1]), cells[2]});
  }
  return manifest;
}

void write_manifest(const PartitionManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileReadError("cannot open manifest for writing: " + path.string());
  out << "instance_id,flare_class,path\n";
  for (const auto& e : manifest.entries) {
    out << e.instance_id << ',' << class_code(e.flare_class) << ',' << e.path << '\n';
  }
  if (!out) throw FileReadError("failed writing manifest: " + path.string());
}

Dataset load_partition(const std::filesystem::path& manifest_path, int partition_id,
                       int threads, LoadStats* stats) {
  const auto manifest = read_manifest(manifest_path, partition_id);
  const auto base = manifest_path.parent_path();

  std::vector<MvtsInstance> instances(manifest.entries.size());
  std::vector<std::size_t> repaired(manifest.entries.size(), 0);
  parallel_for(manifest.entries.size(), threads, [&](std::size_t k) {
    const auto& entry = manifest.entries[k];
    instances[k] = load_instance(base / entry.path, entry, partition_id, repaired[k]);
  });
  if (stats) {
    for (std::size_t r : repaired) {
      stats->repaired_cells += r;
      if (r > 0) ++stats->repaired_instances;
    }
  }

  // Shape agreement is reported per instance before Dataset revalidates.
  for (std::size_t k = 1; k < instances.size(); ++k) {
    if (instances[k].param_names != instances[0].param_names) {
      throw ShapeMismatchError("instance '" + instances[k].instance_id +
                               "' disagrees with '" + instances[0].instance_id +
                               "' on parameter names");
    }
    if (instances[k].values.cols() != instances[0].values.cols()) {
      throw ShapeMismatchError(
          "instance '" + instances[k].instance_id + "' has " +
          std::to_string(instances[k].values.cols()) + " timesteps, expected " +
          std::to_string(instances[0].values.cols()) + " from '" +
          instances[0].instance_id + "'");
    }
  }
  return Dataset(std::move(instances));
}

Dataset load_data_dir(const std::filesystem::path& dir, int threads, LoadStats* stats) {
  if (std::filesystem::exists(dir / "manifest.csv")) {
    return load_partition(dir / "manifest.csv", 1, threads, stats);
  }
  std::vector<std::pair<int, std::filesystem::path>> parts;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_directory() || name.rfind("partition-", 0) != 0) continue;
      const auto suffix = name.substr(10);
      int k = 0;
      try {
        k = std::stoi(suffix);
      } catch (const std::exception&) {
        continue;
      }
      if (k <= 0 || std::to_string(k) != suffix) continue;
      if (std::filesystem::exists(entry.path() / "manifest.csv")) {
        parts.emplace_back(k, entry.path() / "manifest.csv");
      }
    }
  }
  if (parts.empty()) {
    throw FileReadError("no manifest.csv or partition-<k>/manifest.csv under " +
                        dir.string());
  }
  std::sort(parts.begin(), parts.end());
  std::vector<Dataset> loaded;
  loaded.reserve(parts.size());
  for (const auto& [k, manifest] : parts) {
    loaded.push_back(load_partition(manifest, k, threads, stats));
  }
  return merge(loaded);
}

PartitionManifest write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  int partition_id = 1;
  if (!d.empty()) {
    const auto ids = partition_ids(d);
    if (ids.size() > 1) {
      throw ConfigError("write_dataset expects a single partition; split first");
    }
    partition_id = ids[0];
  }
  std::filesystem::create_directories(dir);

  PartitionManifest manifest;
  manifest.partition_id = partition_id;
  for (const auto& inst : d.instances()) {
    if (!safe_id(inst.instance_id)) {
      throw ConfigError("instance_id '" + inst.instance_id +
                        "' is not filesystem-safe (use [A-Za-z0-9._-])");
    }
    manifest.entries.push_back(
        {inst.instance_id, inst.flare_class, inst.instance_id + ".csv"});
  }
  write_manifest(manifest, dir / "manifest.csv");

  for (const auto& inst : d.instances()) {
    std::ostringstream body;
    for (std::size_t p = 0; p < inst.param_names.size(); ++p) {
      if (p > 0) body << ',';
      body << inst.param_names[p];
    }
    body << '\n';
    for (std::size_t t = 0; t < inst.values.cols(); ++t) {
      for (std::size_t p = 0; p < inst.values.rows(); ++p) {
        if (p > 0) body << ',';
        body << format_double(inst.values(p, t));
      }
      body << '\n';
    }
    const auto file = dir / (inst.instance_id + ".csv");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FileReadError("cannot open for writing: " + file.string());
    out << body.str();
    if (!out) throw FileReadError("failed writing: " + file.string());
  }
  return manifest;
}

void SynthConfig::validate() const {
  if (P == 0) throw ConfigError("synth P must be >= 1");
  if (T == 0) throw ConfigError("synth T must be >= 1");
  if (!(noise_sd > 0.0)) throw ConfigError("synth noise_sd must be > 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
    throw ConfigError("synth outlier_fraction must be in [0, 1)");
  }
  if (!std::isfinite(outlier_magnitude)) {
    throw ConfigError("synth outlier_magnitude must be finite");
  }
}

namespace {

FlareClass class_from_key(const std::string& key) {
  if (key.size() != 1) throw ConfigError("unknown flare class key '" + key + "'");
  return parse_flare_class(key);
}

}  // namespace

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"n_per_class",      "P",
                                              "T",                "class_signal",
                                              "noise_sd",         "outlier_fraction",
                                              "outlier_magnitude", "seed"};
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown synth config key '" + key + "'");
  }
  SynthConfig cfg;
  if (j.contains("n_per_class")) {
    for (const auto& [key, value] : j.at("n_per_class").items()) {
      if (!value.is_number_unsigned()) {
        throw ConfigError("n_per_class['" + key + "'] must be a nonnegative integer");
      }
      cfg.n_per_class[class_from_key(key)] = value.get<std::size_t>();
    }
  }
  if (j.contains("P")) cfg.P = j.at("P").get<std::size_t>();
  if (j.contains("T")) cfg.T = j.at("T").get<std::size_t>();
  if (j.contains("class_signal")) {
    for (const auto& [key, value] : j.at("class_signal").items()) {
      ClassSignal sig;
      sig.drift = value.value("drift", 0.0);
      sig.amplitude = value.value("amplitude", 1.0);
      for (const auto& [field, ignored] : value.items()) {
        if (field != "drift" && field != "amplitude") {
          throw ConfigError("unknown class_signal field '" + field + "'");
        }
      }
      cfg.class_signal[class_from_key(key)] = sig;
    }
  }
  if (j.contains("noise_sd")) cfg.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("outlier_fraction")) {
    cfg.outlier_fraction = j.at("outlier_fraction").get<double>();
  }
  if (j.contains("outlier_magnitude")) {
    cfg.outlier_magnitude = j.at("outlier_magnitude").get<double>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::json n_per_class = nlohmann::json::object();
  for (const auto& [c, n] : cfg.n_per_class) {
    n_per_class[std::string(1, class_code(c))] = n;
  }
  nlohmann::json class_signal = nlohmann::json::object();
  for (const auto& [c, sig] : cfg.class_signal) {
    class_signal[std::string(1, class_code(c))] = {{"drift", sig.drift},
                                                   {"amplitude", sig.amplitude}};
  }
  return nlohmann::json{{"n_per_class", n_per_class},
                        {"P", cfg.P},
                        {"T", cfg.T},
                        {"class_signal", class_signal},
                        {"noise_sd", cfg.noise_sd},
                        {"outlier_fraction", cfg.outlier_fraction},
                        {"outlier_magnitude", cfg.outlier_magnitude},
                        {"seed", cfg.seed}};
}

namespace {

// Per-class mean level of parameter p; strictly increasing in flare strength
// for every p so classes separate in expectation.
double class_base(FlareClass c, std::size_t p) {
  const double s = static_cast<double>(class_strength(c));
  return (s + 1.0) * (1.0 + 0.25 * static_cast<double>(p));
}

std::string synth_id(std::uint64_t seed, FlareClass c, std::size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu", idx);
  return "syn-" + std::to_string(seed) + "-" + std::string(1, class_code(c)) + "-" + buf;
}

}  // namespace

std::pair<Dataset, OutlierGroundTruth> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();

  std::vector<MvtsInstance> instances;
  std::vector<std::size_t> weak_indices;  // C, B and N instances, dataset order
  std::vector<std::string> param_names;
  param_names.reserve(cfg.P);
  for (std::size_t p = 0; p < cfg.P; ++p) param_names.push_back("PARAM" + std::to_string(p));

  for (FlareClass c : kFlareClasses) {
    const auto it = cfg.n_per_class.find(c);
    if (it == cfg.n_per_class.end() || it->second == 0) continue;
    ClassSignal sig;
    if (const auto sit = cfg.class_signal.find(c); sit != cfg.class_signal.end()) {
      sig = sit->second;
    }
    for (std::size_t idx = 0; idx < it->second; ++idx) {
      // Independent per-instance stream: edits to counts of one class never
      // shift the noise of another.
      rng::Engine eng(rng::combine(
          cfg.seed, rng::combine(static_cast<std::uint64_t>(class_code(c)), idx)));
      MvtsInstance inst;
      inst.instance_id = synth_id(cfg.seed, c, idx);
      inst.flare_class = c;
      inst.partition_id = 1;
      inst.param_names = param_names;
      inst.values = Matrix(cfg.P, cfg.T);
      for (std::size_t p = 0; p < cfg.P; ++p) {
        const double level = sig.amplitude * class_base(c, p);
        for (std::size_t t = 0; t < cfg.T; ++t) {
          inst.values(p, t) = level + sig.drift * static_cast<double>(t) +
                              cfg.noise_sd * rng::gaussian(eng);
        }
      }
      if (c == FlareClass::C || c == FlareClass::B || c == FlareClass::N) {
        weak_indices.push_back(instances.size());
      }
      instances.push_back(std::move(inst));
    }
  }

  OutlierGroundTruth truth;
  const std::size_t n_outliers = static_cast<std::size_t>(
      std::floor(cfg.outlier_fraction * static_cast<double>(weak_indices.size()) + 0.5));
  if (n_outliers > 0) {
    rng::Engine eng(rng::combine(cfg.seed, 0x6f75746c696572ull));
    const auto chosen = rng::sample_without_replacement(eng, weak_indices.size(), n_outliers);
    for (std::size_t pick : chosen) {
      auto& inst = instances[weak_indices[pick]];
      for (std::size_t p = 0; p < inst.values.rows(); ++p) {
        for (std::size_t t = 0; t < inst.values.cols(); ++t) {
          inst.values(p, t) *= cfg.outlier_magnitude;
        }
      }
      truth.ids.insert(inst.instance_id);
    }
  }
  return {Dataset(std::move(instances)), std::move(truth)};
}

}  // namespace flarecast
