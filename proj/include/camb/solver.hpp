#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camb/camb.hpp"
#include "camb/error.hpp"
#include "camb/priors.hpp"
#include "camb/schedule.hpp"
#include "camb/tensor.hpp"

namespace camb {

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t size, double learning_rate) : lr(learning_rate), m(size, 0.0), v(size, 0.0) {}
  void reset();
};

// One bias-corrected Adam update of params in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Scales grads so their Euclidean norm is at most max_norm; returns the original norm.
double clip_global_norm(std::span<double> grads, double max_norm);

struct SolverConfig {
  std::string op = "camb:3:8";
  bool output_affine = false;
  int inner_iterations = 20;  // J
  double eta_z = 0.01;
  double eta_theta = 0.01;
  int outer_iterations = 100;  // I
  int total_steps = 1000;      // T
  LambdaRule lambda = LambdaRule::constant(0.3);
  DenoiserSpec denoiser = DenoiserSpec::tv();
  std::uint64_t seed = 0;
  double grad_clip = 10.0;  // global norm bound on operator gradients; <= 0 disables
  // Checks after every inner step that the operator keeps the order of random pairs.
  bool check_monotone = false;

  void validate() const;
};

struct FidelitySettings {
  int iterations = 20;
  double eta_z = 0.01;
  double eta_theta = 0.01;
  double grad_clip = 10.0;
  bool freeze_z = false;
  bool check_monotone = false;
  std::uint64_t check_seed = 0;
  // Below this loss the gradients are rounding noise, which Adam would rescale
  // into full steps; such iterations record the loss and skip the update.
  double loss_floor = 1e-24;
};

struct FidelityResult {
  ImageTensor z;
  Operator op = AffineOperator{};
  std::vector<double> losses;  // loss before each of the J updates
};

// mean (y - op(z))^2 + lambda * mean (z - anchor)^2.
double fidelity_loss(const ImageTensor& y, const ImageTensor& z, const Operator& op,
                     const ImageTensor& anchor, double lambda);

// J joint Adam steps on (z, operator parameters). z is clamped to [0,1] after
// every step. Throws NonFiniteLoss when the loss stops being finite.
FidelityResult fidelity_solve(const ImageTensor& y, ImageTensor z, Operator op,
                              const ImageTensor& anchor, double lambda,
                              const FidelitySettings& settings, AdamState& z_state,
                              AdamState& theta_state);

struct RestoreReport {
  ImageTensor restored;
  Operator op = AffineOperator{};
  std::vector<int> timesteps;
  std::vector<double> fidelity_trace;
  std::optional<std::vector<double>> validation_trace;
  std::optional<std::vector<double>> psnr_trace;
  std::vector<double> loss_trace;  // all inner losses, I * J entries
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t iteration, std::vector<double> params);
  std::size_t iteration() const { return iteration_; }
  const std::vector<double>& params() const { return params_; }

 private:
  std::size_t iteration_;
  std::vector<double> params_;
};

// A restore run that hit a non-finite value; carries the traces so far.
class RestoreAborted : public Error {
 public:
  RestoreAborted(const std::string& what, RestoreReport partial);
  const RestoreReport& partial() const { return partial_; }

 private:
  RestoreReport partial_;
};

// Joint zero-shot restoration: alternate the fidelity solve with a noise-and-
// denoise prior step along the coupling schedule and return z after the last
// fidelity solve.
RestoreReport restore(const ImageTensor& y, const SolverConfig& config,
                      const std::optional<ImageTensor>& ground_truth = std::nullopt);

// CSV `iter,t,fidelity,validation,psnr`; last two empty without ground truth.
void write_trace_csv(const RestoreReport& report, const std::string& path);
std::string trace_csv(const RestoreReport& report);

struct CurveFit {
  CambOperator op;
  double sup_error = 0.0;
  std::vector<double> losses;
};

inline constexpr std::size_t kCurveGridPoints = 1001;

// Fits a CaMB operator of the given shape to (z, f(z)) samples by Adam on the
// mean squared error, starting from the identity. The sup error is measured
// on a 1001-point grid against linear interpolation of the samples. The fit
// is full-batch and deterministic, so seed has no effect on the result.
CurveFit fit_curve(std::vector<std::pair<double, double>> samples, int degree, int depth,
                   int steps, double eta, std::uint64_t seed = 0);

// Sorted abscissae for curve fitting: 0, 1 and points - 2 uniform draws from
// Pcg64(seed, "samples").
std::vector<double> sample_points(int points, std::uint64_t seed);

// Sorted samples validated as monotone (throws ParameterError otherwise).
std::vector<std::pair<double, double>> validate_samples(std::vector<std::pair<double, double>> samples);

double sup_error_against_samples(const Operator& op, std::span<const std::pair<double, double>> sorted_samples);

}  // namespace camb
