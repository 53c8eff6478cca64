#include "huberfl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "huberfl/rng.hpp"
#include "huberfl/tasks.hpp"

namespace huberfl {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-5;

double hybrid_error(double analytic, double fd) {
  double scale = std::max({1.0, std::abs(analytic), std::abs(fd)});
  return std::abs(analytic - fd) / scale;
}

/// Compares an analytic gradient against central differences of `loss` over
/// the half-open index range [begin, end) of the flat parameter vector.
GradCheckEntry check_group(const std::string& name, Vector params,
                           const Vector& analytic,
                           const std::function<double(const Vector&)>& loss,
                           std::size_t begin, std::size_t end, bool perturb) {
  GradCheckEntry entry;
  entry.name = name;
  for (std::size_t k = begin; k < end; ++k) {
    double saved = params[k];
    params[k] = saved + kStep;
    double up = loss(params);
    params[k] = saved - kStep;
    double down = loss(params);
    params[k] = saved;
    double fd = (up - down) / (2.0 * kStep);
    double a = analytic[k];
    if (perturb && k == begin) a += 1e-3;
    double err = hybrid_error(a, fd);
    if (err > entry.max_err) {
      entry.max_err = err;
      entry.worst_index = k;
    }
  }
  entry.pass = entry.max_err <= kTolerance;
  return entry;
}

}  // namespace

bool GradCheckReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.pass; });
}

GradCheckReport gradient_checks(bool perturb) {
  GradCheckReport report;

  {
    Rng rng(20240501);
    RegressionDataset data = linreg_synthesize(8, 30, rng);
    std::vector<std::size_t> shard = {0, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    Vector w(8);
    for (double& v : w) v = rng.normal();
    Vector analytic = linreg_gradient(w, data, shard);
    auto loss = [&](const Vector& p) { return linreg_loss(p, data, shard); };
    report.entries.push_back(
        check_group("regression/weights", w, analytic, loss, 0, w.size(), perturb));

    std::vector<std::size_t> single = {4};
    Vector analytic_single = linreg_gradient(w, data, single);
    auto loss_single = [&](const Vector& p) { return linreg_loss(p, data, single); };
    report.entries.push_back(check_group("regression/single-sample", w, analytic_single,
                                         loss_single, 0, w.size(), false));
  }

  {
    Rng rng(20240502);
    const std::size_t p = 10, h = 4, kc = 3;
    ClassifierDataset data = blobs_synthesize(static_cast<int>(kc), 12, p, 0.8, rng);
    std::vector<std::size_t> shard = {0, 2, 5, 7, 10};
    MlpWeights weights = MlpWeights::init(p, h, kc, rng);
    // Non-zero biases so every group is exercised away from the origin.
    for (double& b : weights.b1) b = 0.1 * rng.normal();
    for (double& b : weights.b2) b = 0.1 * rng.normal();

    Vector flat = weights.flatten();
    Vector analytic = mlp_gradient(weights, data, shard);
    auto loss = [&](const Vector& v) {
      return mlp_loss(MlpWeights::unflatten(v, p, h, kc), data, shard);
    };
    const std::size_t w1_end = p * h;
    const std::size_t b1_end = w1_end + h;
    const std::size_t w2_end = b1_end + h * kc;
    const std::size_t b2_end = w2_end + kc;
    report.entries.push_back(
        check_group("mlp/layer1-weights", flat, analytic, loss, 0, w1_end, false));
    report.entries.push_back(
        check_group("mlp/layer1-bias", flat, analytic, loss, w1_end, b1_end, false));
    report.entries.push_back(
        check_group("mlp/layer2-weights", flat, analytic, loss, b1_end, w2_end, false));
    report.entries.push_back(
        check_group("mlp/layer2-bias", flat, analytic, loss, w2_end, b2_end, false));
  }

  return report;
}

bool run_gradient_checks(std::ostream& out, bool perturb) {
  GradCheckReport report = gradient_checks(perturb);
  for (const GradCheckEntry& e : report.entries) {
    out << (e.pass ? "PASS" : "FAIL") << "  " << e.name << "  max_err=" << e.max_err;
    if (!e.pass) out << "  worst parameter index " << e.worst_index;
    out << "\n";
  }
  out << (report.all_pass() ? "gradcheck: all checks passed\n"
                            : "gradcheck: FAILURES present\n");
  return report.all_pass();
}

}  // namespace huberfl
