#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "huberfl/errors.hpp"
#include "huberfl/experiment.hpp"

using namespace huberfl;

namespace {

ExperimentConfig small_regression_config() {
  ExperimentConfig c;
  c.task = "regression";
  c.d = 4;
  c.n_samples = 120;
  c.n_test = 100;
  c.m = 8;
  c.aggregator = "huber";
  c.threshold = 1.0;
  c.attack = "hlma";
  c.eps = 0.25;
  c.eta = 0.1;
  c.rounds = 6;
  c.seed = 11;
  c.output = "out.csv";
  return c;
}

}  // namespace

TEST_CASE("config parse errors carry golden messages") {
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(parse_config("/nonexistent/path.cfg"),
                         "config error (/nonexistent/path.cfg): cannot open file",
                         ConfigError);
  }

  SUBCASE("empty file lists every missing required key") {
    CHECK_THROWS_WITH_AS(
        parse_config_text("", "empty.cfg"),
        "config error (empty.cfg): missing required keys: task, m, aggregator, attack, "
        "eta, rounds, seed, output",
        ConfigError);
  }

  SUBCASE("syntax error with line number") {
    CHECK_THROWS_WITH_AS(parse_config_text("task = regression\nbogus line\n", "s.cfg"),
                         "config error (s.cfg:2): expected key=value", ConfigError);
  }

  SUBCASE("unknown key with line number") {
    CHECK_THROWS_WITH_AS(parse_config_text("task = regression\nfoo = 1\n", "u.cfg"),
                         "config error (u.cfg:2): unknown key 'foo'", ConfigError);
  }

  SUBCASE("duplicate key") {
    CHECK_THROWS_WITH_AS(parse_config_text("m = 1\nm = 2\n", "d.cfg"),
                         "config error (d.cfg:2): duplicate key 'm'", ConfigError);
  }

  SUBCASE("invalid value") {
    CHECK_THROWS_WITH_AS(parse_config_text("task = regression\neta = fast\n", "v.cfg"),
                         "config error (v.cfg:2): invalid value for 'eta': 'fast'",
                         ConfigError);
  }

  SUBCASE("eps domain") {
    ExperimentConfig c = small_regression_config();
    c.eps = 0.0;
    std::string text = serialize_config(c);
    // Rewrite eps to an out-of-range value.
    auto at = text.find("eps = 0");
    text.replace(at, 7, "eps = 0.6");
    CHECK_THROWS_WITH_AS(parse_config_text(text, "e.cfg"),
                         "config error (e.cfg): 'eps' must be in [0, 0.5)", ConfigError);
  }

  SUBCASE("huber threshold requirement") {
    ExperimentConfig c = small_regression_config();
    c.threshold.reset();
    CHECK_THROWS_WITH_AS(
        parse_config_text(serialize_config(c), "h.cfg"),
        "config error (h.cfg): huber threshold required: set 'threshold' or both 't0' "
        "and 'bigm'",
        ConfigError);
  }

  SUBCASE("comments and blank lines are fine") {
    std::string text = "# leading comment\n\n" + serialize_config(small_regression_config()) +
                       "   # trailing comment line\n";
    CHECK_NOTHROW(parse_config_text(text, "c.cfg"));
  }
}

TEST_CASE("config round-trips through serialize") {
  SUBCASE("regression with fixed threshold") {
    ExperimentConfig c = small_regression_config();
    CHECK(parse_config_text(serialize_config(c), "rt.cfg") == c);
  }

  SUBCASE("regression with adaptive thresholds and stick allocation") {
    ExperimentConfig c = small_regression_config();
    c.threshold.reset();
    c.t0 = 0.0;
    c.bigm = 2.0;
    c.allocation = "stick";
    c.sigma_param = 0.2;
    CHECK(parse_config_text(serialize_config(c), "rt2.cfg") == c);
  }

  SUBCASE("classifier on blobs") {
    ExperimentConfig c;
    c.task = "classifier";
    c.classifier_source = "blobs";
    c.classes = 5;
    c.features = 16;
    c.spread = 0.8;
    c.hidden = 8;
    c.n_samples = 500;
    c.n_test = 200;
    c.m = 20;
    c.aggregator = "cwtm";
    c.cwtm_eps = 0.3;
    c.attack = "tma";
    c.eps = 0.3;
    c.eta = 0.4;
    c.rounds = 3;
    c.seed = 5;
    c.output = "blobs.csv";
    CHECK(parse_config_text(serialize_config(c), "rt3.cfg") == c);
  }

  SUBCASE("classifier on mnist paths") {
    ExperimentConfig c;
    c.task = "classifier";
    c.classifier_source = "mnist";
    c.images_path = "train-images.idx";
    c.labels_path = "train-labels.idx";
    c.test_images_path = "t10k-images.idx";
    c.test_labels_path = "t10k-labels.idx";
    c.hidden = 32;
    c.m = 10;
    c.aggregator = "mean";
    c.attack = "none";
    c.eta = 0.1;
    c.rounds = 1;
    c.seed = 2;
    c.output = "mnist.csv";
    CHECK(parse_config_text(serialize_config(c), "rt4.cfg") == c);
  }
}

TEST_CASE("shipped reference config matches the synthetic setup") {
  ExperimentConfig c = parse_config(std::string(HUBERFL_CONFIG_DIR) +
                                    "/synthetic_eps02_hlma.cfg");
  CHECK(c.task == "regression");
  CHECK(c.d == 50);
  CHECK(c.n_samples == 10000);
  CHECK(c.m == 500);
  CHECK(c.allocation == "balanced");
  CHECK(c.aggregator == "huber");
  CHECK(c.threshold == 1.0);
  CHECK(c.attack == "hlma");
  CHECK(c.eps == 0.2);
  CHECK(c.eta == 0.02);
  CHECK(c.rounds == 200);
}

TEST_CASE("metrics csv") {
  ExperimentConfig c = small_regression_config();
  ExperimentResult result = run_experiment(c);

  SUBCASE("schema and determinism") {
    std::string csv = metrics_csv(result);
    CHECK(csv.rfind("# metric_name=rmse\n"
                    "round,metric,aggregation_error,attack_success,elapsed_ms\n",
                    0) == 0);
    ExperimentResult again = run_experiment(c);
    CHECK(metrics_csv(again) == csv);  // byte identical

    // Rounds strictly increasing from zero.
    CHECK(result.logs.size() == 6);
    for (std::size_t t = 0; t < result.logs.size(); ++t)
      CHECK(result.logs[t].round == static_cast<int>(t));
  }

  SUBCASE("rounds = 0 gives a header-only file") {
    ExperimentConfig zero = c;
    zero.rounds = 0;
    ExperimentResult r = run_experiment(zero);
    CHECK(metrics_csv(r) ==
          "# metric_name=rmse\nround,metric,aggregation_error,attack_success,elapsed_ms\n");
    CHECK(r.final_metric > 0.0);  // metric of the untouched initial weights
  }

  SUBCASE("aggregation_error column is empty for classifier runs") {
    ExperimentConfig blobs;
    blobs.task = "classifier";
    blobs.n_samples = 60;
    blobs.n_test = 30;
    blobs.classes = 3;
    blobs.features = 6;
    blobs.hidden = 4;
    blobs.m = 6;
    blobs.aggregator = "mean";
    blobs.attack = "none";
    blobs.eta = 0.2;
    blobs.rounds = 2;
    blobs.seed = 3;
    blobs.output = "x.csv";
    ExperimentResult r = run_experiment(blobs);
    std::string csv = metrics_csv(r);
    CHECK(csv.find("# metric_name=accuracy") == 0);
    // Row shape: round,metric,,0,0
    CHECK(csv.find(",,0,0\n") != std::string::npos);
  }

  SUBCASE("timing column stays zero unless requested") {
    std::string csv = metrics_csv(result, false);
    for (const RoundLog& log : result.logs) CHECK(log.elapsed_ms >= 0.0);
    std::size_t data = csv.find('\n', csv.find('\n') + 1) + 1;
    std::string first_row = csv.substr(data, csv.find('\n', data) - data);
    CHECK(first_row.substr(first_row.size() - 2) == ",0");
  }
}

TEST_CASE("update csv parsing") {
  SUBCASE("single row echoes through") {
    UpdateSet u = parse_update_csv_text("3, 1.5, -2.0, 0.25\n", "one.csv");
    CHECK(u.count() == 1);
    CHECK(u.weights[0] == 3);
    CHECK(u.vectors[0] == Vector{1.5, -2.0, 0.25});
  }

  SUBCASE("ragged rows name the row") {
    CHECK_THROWS_WITH_AS(parse_update_csv_text("1,2,3\n1,2\n", "r.csv"),
                         "csv error (r.csv:2): row has 2 columns, expected 3", CsvError);
  }

  SUBCASE("non-numeric cells name the row") {
    CHECK_THROWS_WITH_AS(parse_update_csv_text("1,2,3\n1,x,3\n", "n.csv"),
                         "csv error (n.csv:2): invalid number 'x'", CsvError);
  }

  SUBCASE("bad sample counts are rejected") {
    CHECK_THROWS_WITH_AS(parse_update_csv_text("0,2\n", "w.csv"),
                         "csv error (w.csv:1): invalid sample count '0'", CsvError);
    CHECK_THROWS_AS(parse_update_csv_text("1.5,2\n", "w.csv"), CsvError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(parse_update_csv("/no/such.csv"),
                         "csv error (/no/such.csv): cannot open file", CsvError);
  }
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -1.5, 0.1, 3.141592653589793, 1e-12, 12345.6789}) {
    std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}
