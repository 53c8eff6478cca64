#include "huberfl/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "huberfl/errors.hpp"
#include "huberfl/mnist.hpp"
#include "huberfl/vec.hpp"

namespace huberfl {

namespace {

// Stream ids hung off the config seed; federation adds its own for init/rounds.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kAllocStream = 3;
constexpr std::uint64_t kByzantineStream = 4;
constexpr std::uint64_t kHeterogeneityStream = 5;

std::string trim(std::string_view s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

constexpr std::array<const char*, 8> kRequiredKeys = {
    "task", "m", "aggregator", "attack", "eta", "rounds", "seed", "output"};

constexpr std::array<const char*, 31> kKnownKeys = {
    "task", "d", "n_samples", "n_test", "noise_std", "sigma_param",
    "classifier_source", "classes", "features", "spread", "hidden",
    "images_path", "labels_path", "test_images_path", "test_labels_path",
    "m", "allocation", "aggregator", "threshold", "t0", "bigm", "cwtm_eps",
    "q", "solver_tol", "solver_max_iters", "attack", "eps", "eta", "rounds",
    "seed", "output"};

struct KeyValue {
  std::string key;
  std::string value;
  int line;
};

[[noreturn]] void bad_value(const std::string& origin, int line, const std::string& key,
                            const std::string& value) {
  throw ConfigError("(" + origin + ":" + std::to_string(line) + "): invalid value for '" +
                    key + "': '" + value + "'");
}

double parse_double_value(const KeyValue& kv, const std::string& origin) {
  double out = 0.0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(origin, kv.line, kv.key, kv.value);
  return out;
}

std::int64_t parse_int_value(const KeyValue& kv, const std::string& origin) {
  std::int64_t out = 0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(origin, kv.line, kv.key, kv.value);
  return out;
}

std::uint64_t parse_uint_value(const KeyValue& kv, const std::string& origin) {
  std::uint64_t out = 0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(origin, kv.line, kv.key, kv.value);
  return out;
}

[[noreturn]] void domain_error(const std::string& origin, const std::string& message) {
  throw ConfigError("(" + origin + "): " + message);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  std::vector<KeyValue> entries;
  std::vector<std::string> seen;
  {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::string stripped = trim(raw);
      if (stripped.empty()) continue;
      std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("(" + origin + ":" + std::to_string(line) +
                          "): expected key=value");
      KeyValue kv{trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), line};
      if (kv.key.empty())
        throw ConfigError("(" + origin + ":" + std::to_string(line) +
                          "): expected key=value");
      if (std::find(kKnownKeys.begin(), kKnownKeys.end(), kv.key) == kKnownKeys.end())
        throw ConfigError("(" + origin + ":" + std::to_string(line) + "): unknown key '" +
                          kv.key + "'");
      if (std::find(seen.begin(), seen.end(), kv.key) != seen.end())
        throw ConfigError("(" + origin + ":" + std::to_string(line) + "): duplicate key '" +
                          kv.key + "'");
      seen.push_back(kv.key);
      entries.push_back(std::move(kv));
    }
  }

  ExperimentConfig config;
  for (const KeyValue& kv : entries) {
    const std::string& k = kv.key;
    if (k == "task") config.task = kv.value;
    else if (k == "d") config.d = parse_int_value(kv, origin);
    else if (k == "n_samples") config.n_samples = parse_int_value(kv, origin);
    else if (k == "n_test") config.n_test = parse_int_value(kv, origin);
    else if (k == "noise_std") config.noise_std = parse_double_value(kv, origin);
    else if (k == "sigma_param") config.sigma_param = parse_double_value(kv, origin);
    else if (k == "classifier_source") config.classifier_source = kv.value;
    else if (k == "classes") config.classes = parse_int_value(kv, origin);
    else if (k == "features") config.features = parse_int_value(kv, origin);
    else if (k == "spread") config.spread = parse_double_value(kv, origin);
    else if (k == "hidden") config.hidden = parse_int_value(kv, origin);
    else if (k == "images_path") config.images_path = kv.value;
    else if (k == "labels_path") config.labels_path = kv.value;
    else if (k == "test_images_path") config.test_images_path = kv.value;
    else if (k == "test_labels_path") config.test_labels_path = kv.value;
    else if (k == "m") config.m = parse_int_value(kv, origin);
    else if (k == "allocation") config.allocation = kv.value;
    else if (k == "aggregator") config.aggregator = kv.value;
    else if (k == "threshold") config.threshold = parse_double_value(kv, origin);
    else if (k == "t0") config.t0 = parse_double_value(kv, origin);
    else if (k == "bigm") config.bigm = parse_double_value(kv, origin);
    else if (k == "cwtm_eps") config.cwtm_eps = parse_double_value(kv, origin);
    else if (k == "q") config.q = parse_int_value(kv, origin);
    else if (k == "solver_tol") config.solver_tol = parse_double_value(kv, origin);
    else if (k == "solver_max_iters") config.solver_max_iters = parse_int_value(kv, origin);
    else if (k == "attack") config.attack = kv.value;
    else if (k == "eps") config.eps = parse_double_value(kv, origin);
    else if (k == "eta") config.eta = parse_double_value(kv, origin);
    else if (k == "rounds") config.rounds = parse_int_value(kv, origin);
    else if (k == "seed") config.seed = parse_uint_value(kv, origin);
    else if (k == "output") config.output = kv.value;
  }

  std::vector<std::string> missing;
  for (const char* required : kRequiredKeys) {
    if (std::find(seen.begin(), seen.end(), required) == seen.end())
      missing.emplace_back(required);
  }
  if (!missing.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) joined += ", ";
      joined += missing[i];
    }
    domain_error(origin, "missing required keys: " + joined);
  }

  // Domain checks, cheapest-to-explain message per rule.
  if (config.task != "regression" && config.task != "classifier")
    domain_error(origin, "'task' must be regression or classifier");
  if (config.allocation != "balanced" && config.allocation != "stick")
    domain_error(origin, "'allocation' must be balanced or stick");
  static const std::array<const char*, 7> aggregators = {"mean", "huber", "gm", "krum",
                                                         "gmm", "cwm", "cwtm"};
  if (std::find(aggregators.begin(), aggregators.end(), config.aggregator) ==
      aggregators.end())
    domain_error(origin, "'aggregator' must be one of mean, huber, gm, krum, gmm, cwm, cwtm");
  static const std::array<const char*, 5> attacks = {"none", "signflip", "ka", "tma",
                                                     "hlma"};
  if (std::find(attacks.begin(), attacks.end(), config.attack) == attacks.end())
    domain_error(origin, "'attack' must be one of none, signflip, ka, tma, hlma");
  if (config.eps < 0.0 || config.eps >= 0.5)
    domain_error(origin, "'eps' must be in [0, 0.5)");
  if (config.cwtm_eps && (*config.cwtm_eps < 0.0 || *config.cwtm_eps >= 0.5))
    domain_error(origin, "'cwtm_eps' must be in [0, 0.5)");
  if (config.m < 1) domain_error(origin, "'m' must be >= 1");
  if (config.eta <= 0.0) domain_error(origin, "'eta' must be positive");
  if (config.rounds < 0) domain_error(origin, "'rounds' must be >= 0");
  if (config.n_test < 1) domain_error(origin, "'n_test' must be >= 1");
  if (config.noise_std < 0.0) domain_error(origin, "'noise_std' must be >= 0");
  if (config.sigma_param < 0.0) domain_error(origin, "'sigma_param' must be >= 0");
  if (config.solver_max_iters < 1) domain_error(origin, "'solver_max_iters' must be >= 1");
  if (config.threshold && *config.threshold <= 0.0)
    domain_error(origin, "'threshold' must be positive");
  if (config.t0 && *config.t0 < 0.0) domain_error(origin, "'t0' must be >= 0");
  if (config.bigm && *config.bigm < 0.0) domain_error(origin, "'bigm' must be >= 0");
  if ((config.t0.has_value() != config.bigm.has_value()))
    domain_error(origin, "'t0' and 'bigm' must be given together");
  if (config.t0 && config.bigm && *config.t0 + *config.bigm <= 0.0)
    domain_error(origin, "'t0' and 'bigm' must not both be zero");
  if (config.threshold && config.t0)
    domain_error(origin, "give either 'threshold' or the adaptive pair 't0'/'bigm', not both");

  if (config.task == "regression") {
    if (config.d < 1) domain_error(origin, "regression task requires 'd' >= 1");
    if (config.n_samples < 1) domain_error(origin, "regression task requires 'n_samples' >= 1");
  } else {
    if (config.sigma_param != 0.0)
      domain_error(origin, "'sigma_param' requires task=regression");
    if (config.classifier_source == "blobs") {
      if (config.n_samples < 1)
        domain_error(origin, "blobs source requires 'n_samples' >= 1");
      if (config.classes < 2) domain_error(origin, "'classes' must be >= 2");
      if (config.features < 1) domain_error(origin, "'features' must be >= 1");
      if (config.spread < 0.0) domain_error(origin, "'spread' must be >= 0");
    } else if (config.classifier_source == "mnist") {
      std::vector<std::string> needed;
      if (config.images_path.empty()) needed.emplace_back("images_path");
      if (config.labels_path.empty()) needed.emplace_back("labels_path");
      if (config.test_images_path.empty()) needed.emplace_back("test_images_path");
      if (config.test_labels_path.empty()) needed.emplace_back("test_labels_path");
      if (!needed.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < needed.size(); ++i) {
          if (i) joined += ", ";
          joined += needed[i];
        }
        domain_error(origin, "mnist source requires keys: " + joined);
      }
    } else {
      domain_error(origin, "'classifier_source' must be blobs or mnist");
    }
    if (config.hidden < 1) domain_error(origin, "'hidden' must be >= 1");
  }

  const bool needs_huber_threshold = config.aggregator == "huber" || config.attack == "hlma";
  if (needs_huber_threshold && !config.threshold && !config.t0)
    domain_error(origin,
                 "huber threshold required: set 'threshold' or both 't0' and 'bigm'");

  if (config.q) {
    if (config.aggregator == "krum" && config.m - *config.q - 2 < 1)
      domain_error(origin, "krum requires m - q - 2 >= 1");
    if (config.aggregator == "gmm" && 2 * *config.q + 1 > config.m)
      domain_error(origin, "gmm requires 2q + 1 <= m");
    if (*config.q < 0) domain_error(origin, "'q' must be >= 0");
  }

  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(" + path + "): cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::string format_double(double value) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "task = " << c.task << "\n";
  if (c.task == "regression") {
    out << "d = " << c.d << "\n";
    out << "n_samples = " << c.n_samples << "\n";
    out << "noise_std = " << format_double(c.noise_std) << "\n";
    out << "sigma_param = " << format_double(c.sigma_param) << "\n";
  } else {
    out << "classifier_source = " << c.classifier_source << "\n";
    if (c.classifier_source == "blobs") {
      out << "n_samples = " << c.n_samples << "\n";
      out << "classes = " << c.classes << "\n";
      out << "features = " << c.features << "\n";
      out << "spread = " << format_double(c.spread) << "\n";
    } else {
      out << "images_path = " << c.images_path << "\n";
      out << "labels_path = " << c.labels_path << "\n";
      out << "test_images_path = " << c.test_images_path << "\n";
      out << "test_labels_path = " << c.test_labels_path << "\n";
    }
    out << "hidden = " << c.hidden << "\n";
  }
  out << "n_test = " << c.n_test << "\n";
  out << "m = " << c.m << "\n";
  out << "allocation = " << c.allocation << "\n";
  out << "aggregator = " << c.aggregator << "\n";
  if (c.threshold) out << "threshold = " << format_double(*c.threshold) << "\n";
  if (c.t0) out << "t0 = " << format_double(*c.t0) << "\n";
  if (c.bigm) out << "bigm = " << format_double(*c.bigm) << "\n";
  if (c.cwtm_eps) out << "cwtm_eps = " << format_double(*c.cwtm_eps) << "\n";
  if (c.q) out << "q = " << *c.q << "\n";
  out << "solver_tol = " << format_double(c.solver_tol) << "\n";
  out << "solver_max_iters = " << c.solver_max_iters << "\n";
  out << "attack = " << c.attack << "\n";
  out << "eps = " << format_double(c.eps) << "\n";
  out << "eta = " << format_double(c.eta) << "\n";
  out << "rounds = " << c.rounds << "\n";
  out << "seed = " << c.seed << "\n";
  out << "output = " << c.output << "\n";
  return out.str();
}

namespace {

AggregatorSpec build_aggregator(const ExperimentConfig& config) {
  AggregatorSpec spec;
  spec.kind = aggregator_from_name(config.aggregator);
  spec.threshold = config.threshold;
  spec.t0 = config.t0;
  spec.big_m = config.bigm;
  spec.solver_tol = config.solver_tol;
  spec.solver_max_iters = static_cast<int>(config.solver_max_iters);
  spec.trim_eps = config.cwtm_eps.value_or(config.eps);
  spec.q = static_cast<int>(config.q.value_or(
      static_cast<std::int64_t>(config.eps * static_cast<double>(config.m))));
  return spec;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const std::size_t m = static_cast<std::size_t>(config.m);

  std::unique_ptr<TrainingTask> task;
  Allocation allocation;
  Rng alloc_rng(derive_seed(config.seed, kAllocStream));

  if (config.task == "regression") {
    Rng data_rng(derive_seed(config.seed, kDataStream));
    RegressionDataset train_data =
        linreg_synthesize(static_cast<std::size_t>(config.d),
                          static_cast<std::size_t>(config.n_samples), data_rng,
                          config.noise_std);
    Rng test_rng(derive_seed(config.seed, kTestStream));
    RegressionDataset test_data =
        linreg_sample(train_data.true_weights, static_cast<std::size_t>(config.n_test),
                      test_rng, config.noise_std);

    allocation = config.allocation == "balanced"
                     ? allocate_balanced(train_data.size(), m, alloc_rng)
                     : allocate_stick_breaking(train_data.size(), m, alloc_rng);

    auto regression = std::make_unique<RegressionTask>(std::move(train_data),
                                                       std::move(test_data));
    if (config.sigma_param > 0.0) {
      Rng het_rng(derive_seed(config.seed, kHeterogeneityStream));
      ClientPerturbation perturbation = sample_perturbation(
          m, static_cast<std::size_t>(config.d), config.sigma_param, het_rng);
      regression->apply_heterogeneity(
          perturbation, allocation.client_of_sample(regression->sample_count()));
    }
    task = std::move(regression);
  } else {
    ClassifierDataset train_data, test_data;
    if (config.classifier_source == "blobs") {
      Rng data_rng(derive_seed(config.seed, kDataStream));
      auto pair = blobs_synthesize_pair(static_cast<int>(config.classes),
                                        static_cast<std::size_t>(config.n_samples),
                                        static_cast<std::size_t>(config.n_test),
                                        static_cast<std::size_t>(config.features),
                                        config.spread, data_rng);
      train_data = std::move(pair.first);
      test_data = std::move(pair.second);
    } else {
      train_data = mnist_load(config.images_path, config.labels_path);
      test_data = mnist_load(config.test_images_path, config.test_labels_path);
    }
    allocation = config.allocation == "balanced"
                     ? allocate_balanced(train_data.size(), m, alloc_rng)
                     : allocate_stick_breaking(train_data.size(), m, alloc_rng);
    task = std::make_unique<ClassifierTask>(std::move(train_data), std::move(test_data),
                                            static_cast<std::size_t>(config.hidden));
  }

  TrainOptions options;
  options.aggregator = build_aggregator(config);
  Rng byz_rng(derive_seed(config.seed, kByzantineStream));
  options.attack = select_byzantine(m, allocation.sizes(), config.eps, byz_rng);
  options.attack.strategy = attack_from_name(config.attack);
  if (options.attack.strategy == AttackStrategy::HlmAttack)
    options.attack_thresholds = options.aggregator.resolve_thresholds(allocation.sizes());
  options.eta = config.eta;
  options.rounds = static_cast<int>(config.rounds);
  options.seed = config.seed;

  ExperimentResult result;
  result.attack = options.attack;
  result.metric_name = task->metric_name();
  result.logs = train(*task, allocation, options, &result.final_weights);
  result.final_metric =
      result.logs.empty() ? task->metric(result.final_weights) : result.logs.back().metric;
  return result;
}

std::string metrics_csv(const ExperimentResult& result, bool with_timing) {
  std::ostringstream out;
  out << "# metric_name=" << result.metric_name << "\n";
  out << "round,metric,aggregation_error,attack_success,elapsed_ms\n";
  for (const RoundLog& log : result.logs) {
    out << log.round << ',' << format_double(log.metric) << ',';
    if (log.aggregation_error) out << format_double(*log.aggregation_error);
    out << ',' << (log.attack_success ? 1 : 0) << ','
        << (with_timing ? format_double(log.elapsed_ms) : "0") << "\n";
  }
  return out.str();
}

void write_metrics_csv(const std::string& path, const ExperimentResult& result,
                       bool with_timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("(" + path + "): cannot open file for writing");
  out << metrics_csv(result, with_timing);
}

UpdateSet parse_update_csv_text(const std::string& text, const std::string& origin) {
  UpdateSet updates;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::size_t expected_cols = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string stripped = trim(raw);
    if (stripped.empty()) continue;

    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = stripped.find(',', start);
      cells.push_back(trim(stripped.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() < 2)
      throw CsvError("(" + origin + ":" + std::to_string(line) +
                     "): row needs a sample count and at least one coordinate");
    if (expected_cols == 0) expected_cols = cells.size();
    if (cells.size() != expected_cols)
      throw CsvError("(" + origin + ":" + std::to_string(line) + "): row has " +
                     std::to_string(cells.size()) + " columns, expected " +
                     std::to_string(expected_cols));

    std::int64_t weight = 0;
    {
      const char* first = cells[0].data();
      const char* last = first + cells[0].size();
      auto [ptr, ec] = std::from_chars(first, last, weight);
      if (ec != std::errc() || ptr != last || weight < 1)
        throw CsvError("(" + origin + ":" + std::to_string(line) +
                       "): invalid sample count '" + cells[0] + "'");
    }
    Vector row(cells.size() - 1);
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const char* first = cells[k].data();
      const char* last = first + cells[k].size();
      auto [ptr, ec] = std::from_chars(first, last, row[k - 1]);
      if (ec != std::errc() || ptr != last)
        throw CsvError("(" + origin + ":" + std::to_string(line) + "): invalid number '" +
                       cells[k] + "'");
    }
    updates.weights.push_back(weight);
    updates.vectors.push_back(std::move(row));
  }
  if (updates.vectors.empty())
    throw CsvError("(" + origin + "): no data rows");
  return updates;
}

UpdateSet parse_update_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("(" + path + "): cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_update_csv_text(buffer.str(), path);
}

}  // namespace huberfl
