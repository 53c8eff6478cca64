// Command-line front end: run experiments from config files, aggregate client
// vectors from a CSV, check analytic gradients, and sweep a config key.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "huberfl/experiment.hpp"
#include "huberfl/gradcheck.hpp"

namespace {

using namespace huberfl;

int cmd_run(const std::string& config_path, bool with_timing) {
  ExperimentConfig config = parse_config(config_path);
  ExperimentResult result = run_experiment(config);
  write_metrics_csv(config.output, result, with_timing);
  std::cout << "final " << result.metric_name << " = " << format_double(result.final_metric)
            << "\n";
  return 0;
}

int cmd_aggregate(const std::string& input, const std::string& method,
                  double threshold, double t0, double bigm, double eps, int q) {
  UpdateSet updates = parse_update_csv(input);
  updates.validate();

  AggregatorSpec spec;
  spec.kind = aggregator_from_name(method);
  if (threshold > 0) spec.threshold = threshold;
  if (t0 >= 0 && bigm >= 0 && t0 + bigm > 0) {
    spec.t0 = t0;
    spec.big_m = bigm;
  }
  spec.trim_eps = eps;
  spec.q = q;

  Rng rng(0);  // consumed only by gmm
  Vector center = aggregate(updates, spec, rng);
  for (std::size_t k = 0; k < center.size(); ++k) {
    if (k) std::cout << ',';
    std::cout << format_double(center[k]);
  }
  std::cout << "\n";
  return 0;
}

std::string sweep_output_path(const std::string& base, const std::string& key,
                              const std::string& value) {
  std::filesystem::path p(base);
  std::string stem = p.stem().string();
  std::string ext = p.extension().string();
  if (ext.empty()) ext = ".csv";
  p.replace_filename(stem + "_" + key + "-" + value + ext);
  return p.string();
}

int cmd_sweep(const std::string& config_path, const std::string& key,
              const std::vector<std::string>& values, int jobs, bool with_timing) {
  if (values.empty()) {
    std::cout << "sweep: no values given, nothing to do\n";
    return 0;
  }
  ExperimentConfig base = parse_config(config_path);
  std::string base_text = serialize_config(base);

  struct Job {
    std::string value;
    std::string output;
    std::string error;
    double final_metric = 0.0;
    bool ok = false;
  };
  std::vector<Job> results(values.size());

  auto run_one = [&](std::size_t index) {
    Job& job = results[index];
    job.value = values[index];
    try {
      // Rewrite the swept key on the serialized form so the full validation
      // path sees the new value.
      std::string text = base_text;
      std::string line_prefix = key + " = ";
      std::size_t at = text.find(line_prefix);
      bool replaced = false;
      while (at != std::string::npos) {
        if (at == 0 || text[at - 1] == '\n') {
          std::size_t end = text.find('\n', at);
          text.replace(at, end - at, line_prefix + values[index]);
          replaced = true;
          break;
        }
        at = text.find(line_prefix, at + 1);
      }
      if (!replaced) text += line_prefix + values[index] + "\n";

      ExperimentConfig config =
          parse_config_text(text, config_path + " [" + key + "=" + values[index] + "]");
      config.output = sweep_output_path(base.output, key, values[index]);
      job.output = config.output;
      ExperimentResult result = run_experiment(config);
      write_metrics_csv(config.output, result, with_timing);
      job.final_metric = result.final_metric;
      job.ok = true;
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> futures;
    std::size_t next = 0;
    while (next < values.size() || !futures.empty()) {
      while (next < values.size() && futures.size() < static_cast<std::size_t>(jobs))
        futures.push_back(std::async(std::launch::async, run_one, next++));
      futures.front().get();
      futures.erase(futures.begin());
    }
  }

  int failures = 0;
  for (const Job& job : results) {
    if (job.ok) {
      std::cout << key << "=" << job.value << " -> " << job.output
                << " (final " << format_double(job.final_metric) << ")\n";
    } else {
      ++failures;
      std::cerr << key << "=" << job.value << " failed: " << job.error << "\n";
    }
  }
  if (failures)
    std::cerr << "sweep: " << failures << " of " << values.size() << " runs failed\n";
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust federated learning simulation lab"};
  app.require_subcommand(1);

  std::string config_path;
  bool with_timing = false;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_flag("--timing", with_timing,
                "record wall time per round (breaks byte reproducibility)");

  std::string agg_input, agg_method;
  double agg_threshold = 0.0, agg_t0 = -1.0, agg_bigm = -1.0, agg_eps = 0.0;
  int agg_q = 0;
  auto* aggregate_cmd =
      app.add_subcommand("aggregate", "Aggregate client vectors from a CSV file");
  aggregate_cmd->add_option("--input", agg_input, "CSV: n_i followed by the vector, one row per client")
      ->required();
  aggregate_cmd->add_option("--method", agg_method, "mean|huber|gm|krum|gmm|cwm|cwtm")
      ->required();
  aggregate_cmd->add_option("--threshold", agg_threshold, "huber threshold T");
  aggregate_cmd->add_option("--t0", agg_t0, "adaptive threshold offset");
  aggregate_cmd->add_option("--bigm", agg_bigm, "adaptive threshold scale M");
  aggregate_cmd->add_option("--eps", agg_eps, "cwtm trim fraction");
  aggregate_cmd->add_option("--q", agg_q, "byzantine count for krum/gmm");

  bool perturb = false;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference checks of the analytic gradients");
  gradcheck_cmd->add_flag("--perturb", perturb,
                          "inject a deliberate gradient error (self-test of the checker)");

  std::string sweep_config, sweep_key;
  std::vector<std::string> sweep_values;
  int sweep_jobs = 1;
  bool sweep_timing = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  sweep_cmd->add_option("--config", sweep_config, "base config file")->required();
  sweep_cmd->add_option("--key", sweep_key, "config key to vary")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")
      ->delimiter(',');
  sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent runs");
  sweep_cmd->add_flag("--timing", sweep_timing, "record wall time per round");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, with_timing);
    if (aggregate_cmd->parsed())
      return cmd_aggregate(agg_input, agg_method, agg_threshold, agg_t0, agg_bigm,
                           agg_eps, agg_q);
    if (gradcheck_cmd->parsed())
      return run_gradient_checks(std::cout, perturb) ? 0 : 1;
    if (sweep_cmd->parsed())
      return cmd_sweep(sweep_config, sweep_key, sweep_values, sweep_jobs, sweep_timing);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
