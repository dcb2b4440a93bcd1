#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flarecast/mvts.hpp"

namespace flarecast {

struct ManifestEntry {
  std::string instance_id;
  FlareClass flare_class = FlareClass::N;
  std::string path;  // relative to the manifest's directory
};

struct PartitionManifest {
  int partition_id = 1;
  std::vector<ManifestEntry> entries;
};

PartitionManifest read_manifest(const std::filesystem::path& path, int partition_id = 1);
void write_manifest(const PartitionManifest& manifest, const std::filesystem::path& path);

// How much missing-value repair a load performed; echoed in run metadata so
// interpolated datasets are visible downstream.
struct LoadStats {
  std::size_t repaired_cells = 0;
  std::size_t repaired_instances = 0;
};

// Loads every manifest entry. Instance files are parsed in parallel; the
// resulting dataset order always equals manifest order. Missing cells are
// repaired by linear interpolation between the nearest finite neighbors;
// leading and trailing gaps copy the nearest finite value; a parameter row
// with no finite value at all is an error.
Dataset load_partition(const std::filesystem::path& manifest_path, int partition_id = 1,
                       int threads = 0, LoadStats* stats = nullptr);

// Loads either a single-partition directory (dir/manifest.csv, partition 1)
// or a tree of partition-<k>/manifest.csv subdirectories, merged.
Dataset load_data_dir(const std::filesystem::path& dir, int threads = 0,
                      LoadStats* stats = nullptr);

// Writes dir/manifest.csv plus one CSV per instance. Values are serialized
// with shortest round-trip precision so a reload compares exactly equal.
PartitionManifest write_dataset(const Dataset& d, const std::filesystem::path& dir);

struct ClassSignal {
  double drift = 0.0;      // per-timestep linear trend
  double amplitude = 1.0;  // scales the per-class base level
};

struct SynthConfig {
  std::map<FlareClass, std::size_t> n_per_class;
  std::size_t P = 3;
  std::size_t T = 20;
  std::map<FlareClass, ClassSignal> class_signal;
  double noise_sd = 1.0;
  double outlier_fraction = 0.0;
  double outlier_magnitude = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);

struct OutlierGroundTruth {
  std::set<std::string> ids;
};

// Seeded synthetic dataset with per-class mean structure: parameter p of a
// class-c instance follows amplitude * base(c, p) + drift * t + N(0, sd)
// where base strictly increases with flare strength. A round-half-up
// fraction of the weak-class instances (C, B, N) is rescaled by
// outlier_magnitude and reported as ground-truth outliers.
std::pair<Dataset, OutlierGroundTruth> generate_synthetic(const SynthConfig& cfg);

}  // namespace flarecast
