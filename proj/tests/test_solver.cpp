#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "camb/camb.hpp"
#include "camb/degrade.hpp"
#include "camb/error.hpp"
#include "camb/metrics.hpp"
#include "camb/rng.hpp"
#include "camb/solver.hpp"
#include "support.hpp"

using namespace camb;

namespace {

std::vector<std::pair<double, double>> grid_samples(const Curve& c, int points = 257) {
  std::vector<std::pair<double, double>> s;
  for (int i = 0; i < points; ++i) {
    const double z = static_cast<double>(i) / (points - 1);
    s.emplace_back(z, apply_curve(c, z));
  }
  return s;
}

double sup_vs_curve(const Operator& op, const Curve& c) {
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) worst = std::max(worst, std::abs(eval(op, i / 1000.0) - apply_curve(c, i / 1000.0)));
  return worst;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("adam") {
  AdamState zero(3, 0.01);
  std::vector<double> p = {1.0, -2.0, 3.0};
  zero.m = {0.5, 0.5, 0.5};
  zero.v = {0.2, 0.2, 0.2};
  zero.step = 4;
  const std::vector<double> g0(3, 0.0);
  const std::vector<double> before = p;
  AdamState copy = zero;
  adam_step(copy, p, g0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(copy.m[i] == 0.9 * 0.5);
    CHECK(copy.v[i] == 0.999 * 0.2);
  }
  AdamState fresh(3, 0.01);
  std::vector<double> q = before;
  adam_step(fresh, q, g0);
  CHECK(q == before);

  AdamState first(4, 0.01);
  std::vector<double> r = {0, 0, 0, 0};
  const std::vector<double> g = {3.0, -0.5, 1e-3, 250.0};
  adam_step(first, r, g);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(std::abs(r[i]) - 0.01) < 1e-6 * std::max(1.0, 1e-5 / std::abs(g[i])));
  CHECK(r[0] < 0);
  CHECK(r[1] > 0);

  AdamState sq(1, 0.01);
  std::vector<double> x = {1.0};
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> grad = {2.0 * x[0]};
    adam_step(sq, x, grad);
    CHECK(std::abs(x[0]) < prev);
    prev = std::abs(x[0]);
  }
  CHECK(std::abs(x[0]) < 0.9);

  AdamState bad(2, 0.01);
  std::vector<double> two = {1, 2};
  CHECK_THROWS_AS(adam_step(bad, two, std::vector<double>{1.0}), ParameterError);
}

TEST_CASE("gradient clipping") {
  std::vector<double> g = {3.0, 4.0};
  CHECK(clip_global_norm(g, 10.0) == 5.0);
  CHECK(g == std::vector<double>{3.0, 4.0});
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> h = {30.0, 40.0};
  clip_global_norm(h, 0.0);
  CHECK(h == std::vector<double>{30.0, 40.0});
}

TEST_CASE("config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.inner_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = SolverConfig{};
  c.outer_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = SolverConfig{};
  c.eta_z = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = SolverConfig{};
  c.outer_iterations = c.total_steps;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("fidelity loss") {
  Pcg64 rng(71, "loss");
  const ImageTensor z = testing::random_image(rng, 6, 6);
  const ImageTensor y = testing::random_image(rng, 6, 6);
  const ImageTensor a = testing::random_image(rng, 6, 6);
  const Operator op = testing::random_camb(rng, 3, 3);
  CHECK(fidelity_loss(y, z, op, a, 0.7) == doctest::Approx(mse(y, forward(op, z)) + 0.7 * mse(z, a)).epsilon(1e-14));
}

TEST_CASE("fidelity solve at the optimum stays put") {
  Pcg64 rng(72, "opt");
  const ImageTensor z = testing::random_image(rng, 10, 10);
  for (const Operator& op : {Operator{CambOperator::identity(3, 8)}, Operator{AffineOperator{}}}) {
    AdamState zs, ts;
    FidelitySettings settings;
    const FidelityResult r = fidelity_solve(z, z, op, z, 0.5, settings, zs, ts);
    REQUIRE(r.losses.size() == 20);
    for (double l : r.losses) CHECK(l < 1e-28);
    for (double p : parameters(r.op)) CHECK(std::abs(p) < 1e-9);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(r.z[i] - z[i]) < 1e-9);
  }
}

TEST_CASE("freeze-z recovers a gamma curve") {
  const ImageTensor z = make_scene(3, 32, 32);
  ImageTensor grid(1, 256, 1);
  for (std::size_t i = 0; i < 256; ++i) grid[i] = (static_cast<double>(i) + 0.5) / 256.0;
  const Curve gamma = curves::Gamma{2.2};
  ImageTensor y = grid;
  for (double& v : y.values()) v = apply_curve(gamma, v);
  FidelitySettings s;
  s.iterations = 400;
  s.freeze_z = true;
  s.check_monotone = true;
  AdamState zs, ts;
  const FidelityResult r = fidelity_solve(y, grid, CambOperator::identity(3, 8), grid, 0.0, s, zs, ts);
  CHECK(r.z == grid);
  CHECK(r.losses.back() < r.losses.front());
  CHECK(sup_vs_curve(r.op, gamma) < 2e-2);
}

TEST_CASE("inner steps reduce the loss") {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageTensor x = make_scene(seed, 24, 24);
    const DegradeSpec spec = make_random_monotone(seed, 5, 0.01);
    const ImageTensor y = degrade(x, spec);
    Pcg64 rng(seed, "start");
    const ImageTensor z0 = testing::random_image(rng, 24, 24);
    AdamState zs, ts;
    const FidelityResult r = fidelity_solve(y, z0, CambOperator::identity(3, 8), z0, 0.3, FidelitySettings{}, zs, ts);
    const double end = fidelity_loss(y, r.z, r.op, z0, 0.3);
    ratios.push_back(end / r.losses.front());
  }
  CHECK(median(ratios) < 1.0);
}

TEST_CASE("non-finite loss carries diagnostics") {
  ImageTensor y(4, 4, 1, 0.5);
  y[5] = std::numeric_limits<double>::quiet_NaN();
  const ImageTensor z(4, 4, 1, 0.5);
  AdamState zs, ts;
  try {
    fidelity_solve(y, z, CambOperator::identity(3, 2), z, 0.1, FidelitySettings{}, zs, ts);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.iteration() == 0);
    CHECK(e.params().size() == 6);
    CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
  }
  CHECK_THROWS_AS(fidelity_solve(y, ImageTensor(3, 4, 1), CambOperator::identity(3, 2), z, 0.1, FidelitySettings{}, zs, ts),
                  ParameterError);
  CHECK_THROWS_AS(fidelity_solve(z, z, CambOperator::identity(3, 2), z, -1.0, FidelitySettings{}, zs, ts),
                  ParameterError);
}

TEST_CASE("restore report shape and determinism") {
  const ImageTensor x = make_scene(9, 20, 20);
  const ImageTensor y = degrade(x, make_random_monotone(9, 4, 0.01));
  SolverConfig c;
  c.outer_iterations = 12;
  c.inner_iterations = 5;
  c.seed = 5;
  c.check_monotone = true;
  const RestoreReport a = restore(y, c, x);
  const RestoreReport b = restore(y, c, x);
  CHECK(a.restored == b.restored);
  CHECK(a.fidelity_trace == b.fidelity_trace);
  CHECK(*a.validation_trace == *b.validation_trace);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(parameters(a.op) == parameters(b.op));
  CHECK(a.fidelity_trace.size() == 12);
  CHECK(a.validation_trace->size() == 12);
  CHECK(a.psnr_trace->size() == 12);
  CHECK(a.loss_trace.size() == 60);
  CHECK(a.timesteps.front() == 1000);
  for (std::size_t i = 1; i < a.timesteps.size(); ++i) CHECK(a.timesteps[i] < a.timesteps[i - 1]);
  for (double v : a.fidelity_trace) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  CHECK(a.fidelity_trace.back() < a.fidelity_trace.front());
  CHECK(a.fidelity_trace.back() == doctest::Approx(fidelity_error(y, a.op, a.restored)).epsilon(1e-12));
  CHECK(a.validation_trace->back() == doctest::Approx(fidelity_error(y, a.op, x)).epsilon(1e-12));

  c.seed = 6;
  CHECK(!(restore(y, c).restored == a.restored));
  const RestoreReport blind = restore(y, c);
  CHECK(!blind.validation_trace);
  CHECK(!blind.psnr_trace);

  const std::string csv = trace_csv(a);
  CHECK(csv.rfind("iter,t,fidelity,validation,psnr\n0,1000,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  const std::string blind_csv = trace_csv(blind);
  CHECK(blind_csv.find(",,\n") != std::string::npos);
}

TEST_CASE("restore with every operator kind and prior") {
  const ImageTensor x = make_scene(10, 16, 16);
  const ImageTensor y = degrade(x, DegradeSpec{curves::Gamma{1.8}, 0.01, 1});
  for (const char* op : {"camb:3:8", "affine", "monomlp:4,4", "camb:2:2"}) {
    for (const DenoiserSpec& prior : {DenoiserSpec::identity(), DenoiserSpec::gaussian(), DenoiserSpec::tv()}) {
      SolverConfig c;
      c.op = op;
      c.denoiser = prior;
      c.outer_iterations = 4;
      c.inner_iterations = 3;
      const RestoreReport r = restore(y, c);
      CHECK(kind_name(r.op) == kind_name(make_operator(op)));
      for (double v : r.restored.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SolverConfig c;
  c.output_affine = true;
  c.outer_iterations = 3;
  c.inner_iterations = 2;
  const RestoreReport r = restore(y, c);
  CHECK(std::get<CambOperator>(r.op).output_affine_enabled());
  ImageTensor bad = y;
  bad[0] = 1.5;
  CHECK_THROWS_AS(restore(bad, c), DomainError);
  CHECK_THROWS_AS(restore(y, c, ImageTensor(3, 3, 1)), ParameterError);
}

TEST_CASE("fit_curve") {
  const CurveFit id = fit_curve(grid_samples(curves::Gamma{1.0}), 3, 8, 10, 0.01);
  CHECK(id.sup_error < 1e-6);
  const CurveFit none = fit_curve(grid_samples(curves::Gamma{1.0}), 3, 8, 0, 0.01);
  CHECK(none.sup_error < 1e-12);
  CHECK(none.losses.empty());

  const CurveFit gamma = fit_curve(grid_samples(curves::Gamma{2.2}), 3, 8, 2000, 0.01);
  CHECK(gamma.sup_error < 1e-2);
  CHECK(gamma.losses.size() == 2000);

  // Smoothstep 3z^2 - 2z^3 is a Bernstein polynomial of degree 3, so compare
  // depth at a degree that cannot represent it in one layer.
  std::vector<std::pair<double, double>> smooth;
  for (int i = 0; i <= 256; ++i) {
    const double z = i / 256.0;
    smooth.emplace_back(z, z * z * (3 - 2 * z));
  }
  const double k1 = fit_curve(smooth, 3, 1, 2000, 0.01).sup_error;
  const double k8 = fit_curve(smooth, 3, 8, 2000, 0.01).sup_error;
  CHECK(k8 < k1);

  CHECK_THROWS_AS(fit_curve({{0.0, 0.0}, {0.5, 0.6}, {0.7, 0.4}, {1.0, 1.0}}, 3, 2, 10, 0.01), ParameterError);
  CHECK_THROWS_AS(fit_curve({{0.0, 0.0}}, 3, 2, 10, 0.01), ParameterError);
  CHECK_THROWS_AS(fit_curve({{0.0, 0.0}, {1.2, 1.0}}, 3, 2, 10, 0.01), ParameterError);
  const auto sorted = validate_samples({{1.0, 1.0}, {0.0, 0.0}, {0.5, 0.5}});
  CHECK(sorted.front().first == 0.0);
}

TEST_CASE("sup error measures against linear interpolation") {
  const std::vector<std::pair<double, double>> s = {{0.0, 0.0}, {0.5, 0.25}, {1.0, 1.0}};
  const Operator id = CambOperator::identity(2, 1);
  // identity vs the two-segment interpolant differs most at z = 0.5.
  CHECK(sup_error_against_samples(id, s) == doctest::Approx(0.25).epsilon(1e-12));
  const std::vector<std::pair<double, double>> inner = {{0.2, 0.2}, {0.8, 0.8}};
  // Flat extrapolation: at z = 0 the target is 0.2.
  CHECK(sup_error_against_samples(id, inner) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("depth buys effective degree") {
  // A random deep cascade is fitted by a single layer and by a cascade of the same shape.
  Pcg64 rng(73, "deep");
  const CambOperator target = testing::random_camb(rng, 3, 8, 1.5);
  std::vector<std::pair<double, double>> samples;
  for (int i = 0; i <= 256; ++i) samples.emplace_back(i / 256.0, target.eval(i / 256.0));
  const double shallow = fit_curve(samples, 3, 1, 2000, 0.01).sup_error;
  const double deep = fit_curve(samples, 3, 8, 2000, 0.01).sup_error;
  CHECK(shallow >= 10.0 * deep);
}

TEST_CASE("freeze-z fitting covers every curve family") {
  const std::vector<Curve> smooth = {curves::Gamma{2.2}, curves::Sigmoid{0.5, 10}};
  for (const Curve& c : smooth) CHECK(fit_curve(grid_samples(c), 3, 8, 2000, 0.01).sup_error < 1e-2);
  // Kinks and infinite slopes are out of reach for a smooth cascade; the fit still closes most of the gap.
  const std::vector<Curve> rough = {curves::Gamma{0.45}, curves::HdrClip{}, make_random_monotone(3, 5).curve};
  for (const Curve& c : rough) {
    const auto samples = grid_samples(c);
    const double start = fit_curve(samples, 3, 8, 0, 0.01).sup_error;
    const double fit = fit_curve(samples, 3, 8, 2000, 0.01).sup_error;
    CHECK(fit < 0.25 * start);
    CHECK(fit < 6e-2);
  }
}
