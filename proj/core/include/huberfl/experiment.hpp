#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "huberfl/federation.hpp"

namespace huberfl {

/// A full run description, parsed from a flat key=value file. Optional fields
/// keep their defaults when the key is absent; see README for the key list.
struct ExperimentConfig {
  std::string task;  // regression | classifier

  // regression synthesis
  std::int64_t d = 0;
  std::int64_t n_samples = 0;
  std::int64_t n_test = 2000;
  double noise_std = 1.0;
  double sigma_param = 0.0;

  // classifier source
  std::string classifier_source = "blobs";  // blobs | mnist
  std::int64_t classes = 10;
  std::int64_t features = 64;
  double spread = 1.0;
  std::int64_t hidden = 32;
  std::string images_path;
  std::string labels_path;
  std::string test_images_path;
  std::string test_labels_path;

  // federation
  std::int64_t m = 0;
  std::string allocation = "balanced";  // balanced | stick

  // aggregator
  std::string aggregator;  // mean | huber | gm | krum | gmm | cwm | cwtm
  std::optional<double> threshold;
  std::optional<double> t0;
  std::optional<double> bigm;
  std::optional<double> cwtm_eps;  // defaults to the attack eps
  std::optional<std::int64_t> q;  // defaults to floor(eps * m)
  double solver_tol = 0.0;
  std::int64_t solver_max_iters = 10000;

  // attack
  std::string attack;  // none | signflip | ka | tma | hlma
  double eps = 0.0;

  // loop
  double eta = 0.0;
  std::int64_t rounds = 0;
  std::uint64_t seed = 0;
  std::string output;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a config file; throws ConfigError carrying the file
/// path (and line number where one applies).
ExperimentConfig parse_config(const std::string& path);

/// Same parser over in-memory text; `origin` appears in error messages.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Canonical key=value form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

struct ExperimentResult {
  std::vector<RoundLog> logs;
  Vector final_weights;
  double final_metric = 0.0;
  std::string metric_name;
  AttackSpec attack;
};

/// Assembles dataset, allocation, adversary and aggregator from the config
/// and runs the training loop. Deterministic given the config.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// Metrics CSV: a `# metric_name=...` comment, a header row, then one row per
/// round. The timing column is written as 0 unless with_timing is set, so
/// equal seeds produce byte-identical files.
std::string metrics_csv(const ExperimentResult& result, bool with_timing = false);
void write_metrics_csv(const std::string& path, const ExperimentResult& result,
                       bool with_timing = false);

/// Client-vector CSV for one-shot aggregation: per row a sample count n_i
/// followed by the vector entries. Throws CsvError with the 1-based row
/// number on ragged rows or non-numeric cells.
UpdateSet parse_update_csv(const std::string& path);
UpdateSet parse_update_csv_text(const std::string& text, const std::string& origin);

}  // namespace huberfl
