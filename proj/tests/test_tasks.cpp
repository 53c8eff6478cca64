#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "huberfl/errors.hpp"
#include "huberfl/gradcheck.hpp"
#include "huberfl/mnist.hpp"
#include "huberfl/tasks.hpp"
#include "huberfl/vec.hpp"
#include "oracles.hpp"

using namespace huberfl;

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < n; ++j) idx[j] = j;
  return idx;
}

}  // namespace

TEST_CASE("linreg synthesis") {
  SUBCASE("shapes at the reference configuration") {
    Rng rng(101);
    RegressionDataset data = linreg_synthesize(50, 10000, rng);
    CHECK(data.size() == 10000);
    CHECK(data.dim() == 50);
    CHECK(data.features[0].size() == 50);
  }

  SUBCASE("noiseless with zero weights gives zero targets") {
    Rng rng(102);
    RegressionDataset data = linreg_sample(Vector(4, 0.0), 50, rng, 0.0);
    for (double v : data.targets) CHECK(v == 0.0);
  }

  SUBCASE("seeded runs are bitwise identical") {
    Rng a(103), b(103);
    RegressionDataset first = linreg_synthesize(6, 40, a);
    RegressionDataset second = linreg_synthesize(6, 40, b);
    CHECK(first.features == second.features);
    CHECK(first.targets == second.targets);
    CHECK(first.true_weights == second.true_weights);
  }
}

TEST_CASE("linreg gradient") {
  SUBCASE("perfect fit on noiseless data") {
    Rng rng(104);
    Vector w_star = {1.0, -2.0, 0.5};
    RegressionDataset data = linreg_sample(w_star, 30, rng, 0.0);
    auto idx = iota_indices(30);
    Vector g = linreg_gradient(w_star, data, idx);
    for (double v : g) CHECK(std::abs(v) <= 1e-12);
  }

  SUBCASE("single sample hand value") {
    RegressionDataset data;
    data.features = {{1.0, 0.0}};
    data.targets = {0.0};
    data.true_weights = {0.0, 0.0};
    std::vector<std::size_t> shard = {0};
    Vector g = linreg_gradient({2.0, 0.0}, data, shard);
    CHECK(g == Vector{2.0, 0.0});
  }

  SUBCASE("random shard against central finite differences") {
    Rng rng(105);
    RegressionDataset data = linreg_synthesize(6, 40, rng);
    std::vector<std::size_t> shard = {1, 4, 9, 16, 25, 36};
    Vector w(6);
    for (double& v : w) v = rng.normal();
    Vector analytic = linreg_gradient(w, data, shard);
    auto loss = [&](const Vector& p) { return linreg_loss(p, data, shard); };
    for (std::size_t k = 0; k < 6; ++k) {
      double fd = oracles::central_difference(loss, w, k);
      double scale = std::max({1.0, std::abs(fd), std::abs(analytic[k])});
      CHECK(std::abs(analytic[k] - fd) / scale <= 1e-6);
    }
  }

  SUBCASE("empty shard throws") {
    Rng rng(106);
    RegressionDataset data = linreg_synthesize(3, 5, rng);
    CHECK_THROWS_AS(linreg_gradient(Vector(3, 0.0), data, IndexSpan{}),
                    std::invalid_argument);
  }
}

TEST_CASE("linreg true gradient") {
  Rng rng(107);
  RegressionDataset data = linreg_synthesize(5, 10, rng);

  CHECK(norm(linreg_true_gradient(data.true_weights, data)) == 0.0);

  Vector shifted = data.true_weights;
  shifted[0] += 1.0;
  Vector g = linreg_true_gradient(shifted, data);
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t k = 1; k < 5; ++k) CHECK(g[k] == 0.0);

  SUBCASE("Monte-Carlo: empirical mean gradient approaches w - w*") {
    Vector w = data.true_weights;
    w[0] += 0.3;
    w[2] -= 0.2;
    Rng mc(108);
    RegressionDataset fresh = linreg_sample(data.true_weights, 1000000, mc);
    auto idx = iota_indices(fresh.size());
    Vector empirical = linreg_gradient(w, fresh, idx);
    Vector expected = linreg_true_gradient(w, data);
    CHECK(distance(empirical, expected) <= 5e-3);
  }
}

TEST_CASE("regression metric") {
  SUBCASE("zero on a noiseless perfect fit") {
    Rng rng(109);
    Vector w_star = {2.0, -1.0};
    RegressionDataset test = linreg_sample(w_star, 25, rng, 0.0);
    CHECK(regression_metric(w_star, test) == 0.0);
  }

  SUBCASE("noise floor is about one at the true weights") {
    Rng rng(110);
    RegressionDataset test = linreg_synthesize(10, 4000, rng);
    double metric = regression_metric(test.true_weights, test);
    CHECK(metric == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("hand-built three-sample RMSE") {
    RegressionDataset test;
    test.features = {{1.0}, {1.0}, {1.0}};
    test.targets = {0.0, 1.0, 5.0};
    test.true_weights = {0.0};
    // Constant predictor 1: residuals {1, 0, -4}, RMSE = sqrt(17/3).
    CHECK(regression_metric({1.0}, test) ==
          doctest::Approx(std::sqrt(17.0 / 3.0)).epsilon(1e-12));
  }
}

TEST_CASE("mlp weights flatten round-trip") {
  Rng rng(111);
  MlpWeights w = MlpWeights::init(7, 5, 3, rng);
  for (double& b : w.b1) b = rng.normal();
  for (double& b : w.b2) b = rng.normal();
  Vector flat = w.flatten();
  CHECK(flat.size() == w.flat_size());
  MlpWeights back = MlpWeights::unflatten(flat, 7, 5, 3);
  CHECK(back.w1 == w.w1);
  CHECK(back.b1 == w.b1);
  CHECK(back.w2 == w.w2);
  CHECK(back.b2 == w.b2);
  CHECK_THROWS_AS(MlpWeights::unflatten(flat, 7, 5, 4), std::invalid_argument);
}

TEST_CASE("mlp gradient") {
  SUBCASE("all-zero weights: only the output bias moves") {
    ClassifierDataset data;
    data.images = {{0.3, 0.7}, {0.9, 0.1}, {0.5, 0.5}};
    data.labels = {0, 0, 1};  // skewed on purpose
    data.num_classes = 3;
    MlpWeights w;
    w.input_dim = 2;
    w.hidden_dim = 4;
    w.num_classes = 3;
    w.w1.assign(8, 0.0);
    w.b1.assign(4, 0.0);
    w.w2.assign(12, 0.0);
    w.b2.assign(3, 0.0);
    auto idx = iota_indices(3);
    Vector g = mlp_gradient(w, data, idx);
    // Uniform softmax minus the empirical label distribution {2/3, 1/3, 0};
    // everything upstream of the output bias is silenced by zero weights.
    const std::size_t b2_offset = 8 + 4 + 12;
    for (std::size_t k = 0; k < b2_offset; ++k) CHECK(g[k] == 0.0);
    CHECK(g[b2_offset + 0] == doctest::Approx(1.0 / 3.0 - 2.0 / 3.0).epsilon(1e-12));
    CHECK(g[b2_offset + 1] == doctest::Approx(1.0 / 3.0 - 1.0 / 3.0).epsilon(1e-12));
    CHECK(g[b2_offset + 2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("finite differences across every parameter group") {
    Rng rng(113);
    ClassifierDataset data = blobs_synthesize(3, 10, 5, 0.8, rng);
    MlpWeights w = MlpWeights::init(5, 4, 3, rng);
    for (double& b : w.b1) b = 0.2 * rng.normal();
    for (double& b : w.b2) b = 0.2 * rng.normal();
    std::vector<std::size_t> shard = {0, 2, 4, 6, 8};
    Vector analytic = mlp_gradient(w, data, shard);
    Vector flat = w.flatten();
    auto loss = [&](const Vector& v) {
      return mlp_loss(MlpWeights::unflatten(v, 5, 4, 3), data, shard);
    };
    for (std::size_t k = 0; k < flat.size(); ++k) {
      double fd = oracles::central_difference(loss, flat, k);
      double scale = std::max({1.0, std::abs(fd), std::abs(analytic[k])});
      CHECK(std::abs(analytic[k] - fd) / scale <= 1e-5);
    }
  }

  SUBCASE("duplicated samples do not change the mean gradient") {
    Rng rng(114);
    ClassifierDataset data = blobs_synthesize(2, 6, 4, 0.5, rng);
    MlpWeights w = MlpWeights::init(4, 3, 2, rng);
    std::vector<std::size_t> single = {3};
    std::vector<std::size_t> doubled = {3, 3};
    CHECK(mlp_gradient(w, data, single) == mlp_gradient(w, data, doubled));
  }
}

TEST_CASE("classifier metric") {
  SUBCASE("zero weights predict class 0 everywhere") {
    Rng rng(115);
    ClassifierDataset data = blobs_synthesize(10, 500, 8, 1.0, rng);
    MlpWeights w;
    w.input_dim = 8;
    w.hidden_dim = 4;
    w.num_classes = 10;
    w.w1.assign(32, 0.0);
    w.b1.assign(4, 0.0);
    w.w2.assign(40, 0.0);
    w.b2.assign(10, 0.0);
    // Uniform logits tie on every class; the tie-break picks class 0, whose
    // share of round-robin labels is exactly 1/10.
    CHECK(classifier_metric(w, data) == doctest::Approx(0.1).epsilon(1e-12));
  }

  SUBCASE("hand-built separable pair scores 1, label swap scores 0") {
    ClassifierDataset data;
    data.images = {{1.0, 0.0}, {0.0, 1.0}};
    data.labels = {0, 1};
    data.num_classes = 2;
    MlpWeights w;
    w.input_dim = 2;
    w.hidden_dim = 2;
    w.num_classes = 2;
    w.w1 = {10.0, 0.0, 0.0, 10.0};
    w.b1 = {0.0, 0.0};
    w.w2 = {5.0, 0.0, 0.0, 5.0};
    w.b2 = {0.0, 0.0};
    CHECK(classifier_metric(w, data) == 1.0);
    data.labels = {1, 0};
    CHECK(classifier_metric(w, data) == 0.0);
  }
}

TEST_CASE("heterogeneous targets") {
  Rng rng(116);
  RegressionDataset data = linreg_synthesize(3, 8, rng);

  SUBCASE("zero variance leaves targets identical") {
    Rng prng(117);
    ClientPerturbation p = sample_perturbation(2, 3, 0.0, prng);
    std::vector<int> owner = {0, 0, 0, 0, 1, 1, 1, 1};
    RegressionDataset out = heterogeneous_targets(data, p, owner);
    CHECK(out.targets == data.targets);
  }

  SUBCASE("single client shifts every target by <U_j, delta>") {
    Rng prng(118);
    ClientPerturbation p = sample_perturbation(1, 3, 0.2, prng);
    std::vector<int> owner(8, 0);
    RegressionDataset out = heterogeneous_targets(data, p, owner);
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(out.targets[j] ==
            doctest::Approx(data.targets[j] + dot(data.features[j], p.deltas[0]))
                .epsilon(1e-15));
  }

  SUBCASE("two-client hand case against the inner-product oracle") {
    RegressionDataset tiny;
    tiny.features = {{1.0, 2.0}, {3.0, -1.0}};
    tiny.targets = {5.0, 7.0};
    tiny.true_weights = {1.0, 1.0};
    ClientPerturbation p;
    p.sigma_param = 1.0;
    p.deltas = {{0.5, 0.0}, {0.0, -1.0}};
    std::vector<int> owner = {0, 1};
    RegressionDataset out = heterogeneous_targets(tiny, p, owner);
    CHECK(out.targets[0] == doctest::Approx(5.0 + 0.5).epsilon(1e-15));
    CHECK(out.targets[1] == doctest::Approx(7.0 + 1.0).epsilon(1e-15));
  }

  SUBCASE("missing assignment throws") {
    ClientPerturbation p = sample_perturbation(2, 3, 0.1, rng);
    std::vector<int> short_owner = {0, 1};
    CHECK_THROWS_AS(heterogeneous_targets(data, p, short_owner), std::invalid_argument);
    std::vector<int> bad_owner(8, 5);
    CHECK_THROWS_AS(heterogeneous_targets(data, p, bad_owner), std::invalid_argument);
  }

  SUBCASE("variance convention: sigma_param is a variance") {
    Rng prng(119);
    ClientPerturbation p = sample_perturbation(2000, 1, 0.2, prng);
    double sum_sq = 0.0;
    for (const auto& delta : p.deltas) sum_sq += delta[0] * delta[0];
    CHECK(sum_sq / 2000.0 == doctest::Approx(0.2).epsilon(0.1));
  }
}

TEST_CASE("blobs synthesis") {
  SUBCASE("zero spread is perfectly learnable") {
    Rng rng(120);
    auto [train, test] = blobs_synthesize_pair(3, 120, 60, 6, 0.0, rng);
    Rng init_rng(121);
    MlpWeights w = MlpWeights::init(6, 8, 3, init_rng);
    Vector flat = w.flatten();
    auto idx = iota_indices(train.size());
    for (int step = 0; step < 150; ++step) {
      Vector g = mlp_gradient(MlpWeights::unflatten(flat, 6, 8, 3), train, idx);
      for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= 0.5 * g[k];
    }
    CHECK(classifier_metric(MlpWeights::unflatten(flat, 6, 8, 3), test) == 1.0);
  }

  SUBCASE("seeded determinism") {
    Rng a(122), b(122);
    ClassifierDataset first = blobs_synthesize(4, 50, 5, 1.0, a);
    ClassifierDataset second = blobs_synthesize(4, 50, 5, 1.0, b);
    CHECK(first.images == second.images);
    CHECK(first.labels == second.labels);
  }
}

TEST_CASE("gradient check harness") {
  GradCheckReport clean = gradient_checks(false);
  CHECK(clean.all_pass());
  CHECK(clean.entries.size() == 6);
  bool has_regression = false, has_mlp = false;
  for (const auto& e : clean.entries) {
    if (e.name.rfind("regression/", 0) == 0) has_regression = true;
    if (e.name.rfind("mlp/", 0) == 0) has_mlp = true;
  }
  CHECK(has_regression);
  CHECK(has_mlp);

  // The perturb hook injects an error the checker must catch.
  GradCheckReport broken = gradient_checks(true);
  CHECK_FALSE(broken.all_pass());
}

TEST_CASE("idx files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "huberfl_idx_test";
  fs::create_directories(dir);
  const std::string images = (dir / "images.idx").string();
  const std::string labels = (dir / "labels.idx").string();

  SUBCASE("two-image fixture round-trips exactly") {
    ClassifierDataset fixture;
    fixture.num_classes = 10;
    fixture.images = {{0.0, 1.0 / 255.0, 128.0 / 255.0, 1.0},
                      {17.0 / 255.0, 0.0, 255.0 / 255.0, 42.0 / 255.0}};
    fixture.labels = {3, 9};
    idx_write(images, labels, fixture, 2, 2);
    ClassifierDataset loaded = mnist_load(images, labels);
    CHECK(loaded.size() == 2);
    CHECK(loaded.dim() == 4);
    CHECK(loaded.images == fixture.images);
    CHECK(loaded.labels == fixture.labels);
    CHECK(loaded.num_classes == 10);
  }

  SUBCASE("missing and empty files raise parse errors") {
    CHECK_THROWS_AS(mnist_load((dir / "absent.idx").string(), labels), IdxError);
    const std::string empty = (dir / "empty.idx").string();
    std::ofstream(empty).close();
    CHECK_THROWS_AS(mnist_load(empty, labels), IdxError);
  }

  SUBCASE("bad magic, truncation and count mismatch are distinct errors") {
    ClassifierDataset fixture;
    fixture.num_classes = 2;
    fixture.images = {{0.5}, {0.25}};
    fixture.labels = {0, 1};
    idx_write(images, labels, fixture, 1, 1);

    // Wrong magic: feed the label file through the image path.
    CHECK_THROWS_WITH_AS(mnist_load(labels, labels),
                         doctest::Contains("bad magic"), IdxError);

    // Truncated image payload.
    const std::string cut = (dir / "cut.idx").string();
    {
      std::ifstream in(images, std::ios::binary);
      std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
      bytes.pop_back();
      std::ofstream out(cut, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(mnist_load(cut, labels), doctest::Contains("truncated"),
                         IdxError);

    // Count mismatch between the two files.
    ClassifierDataset bigger;
    bigger.num_classes = 2;
    bigger.images = {{0.5}, {0.25}, {0.75}};
    bigger.labels = {0, 1, 1};
    const std::string images3 = (dir / "images3.idx").string();
    const std::string labels3 = (dir / "labels3.idx").string();
    idx_write(images3, labels3, bigger, 1, 1);
    CHECK_THROWS_WITH_AS(mnist_load(images3, labels),
                         doctest::Contains("does not match"), IdxError);
  }
}
