#include "camb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "camb/metrics.hpp"
#include "camb/rng.hpp"

namespace camb {

void AdamState::reset() {
  step = 0;
  std::fill(m.begin(), m.end(), 0.0);
  std::fill(v.begin(), v.end(), 0.0);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw ParameterError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ParameterError("adam_step: moment shapes do not match the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void SolverConfig::validate() const {
  if (inner_iterations < 1) throw ParameterError("inner iterations J must be >= 1");
  if (outer_iterations < 1) throw ParameterError("outer iterations I must be >= 1");
  if (!(eta_z > 0.0) || !(eta_theta > 0.0)) throw ParameterError("step sizes must be positive");
  if (outer_iterations >= total_steps) {
    throw ParameterError("outer iterations I must be smaller than the diffusion steps T");
  }
}

NonFiniteLoss::NonFiniteLoss(std::size_t iteration, std::vector<double> params)
    : Error([&] {
        std::ostringstream os;
        os.precision(17);
        os << "non-finite loss at inner iteration " << iteration << "; operator parameters [";
        for (std::size_t i = 0; i < params.size(); ++i) os << (i ? ", " : "") << params[i];
        os << "]";
        return os.str();
      }()),
      iteration_(iteration),
      params_(std::move(params)) {}

RestoreAborted::RestoreAborted(const std::string& what, RestoreReport partial)
    : Error(what), partial_(std::move(partial)) {}

double fidelity_loss(const ImageTensor& y, const ImageTensor& z, const Operator& op,
                     const ImageTensor& anchor, double lambda) {
  require_same_shape(y, z, "fidelity_loss");
  require_same_shape(y, anchor, "fidelity_loss");
  return mse(y, forward(op, z)) + lambda * mse(z, anchor);
}

namespace {

void check_order(const Operator& op, Pcg64& rng, std::size_t iteration) {
  for (int k = 0; k < 10; ++k) {
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    if (eval(op, a) > eval(op, b)) {
      std::ostringstream os;
      os.precision(17);
      os << "operator lost monotonicity at inner iteration " << iteration << ": f(" << a
         << ") > f(" << b << ")";
      throw Error(os.str());
    }
  }
}

}  // namespace

FidelityResult fidelity_solve(const ImageTensor& y, ImageTensor z, Operator op,
                              const ImageTensor& anchor, double lambda,
                              const FidelitySettings& settings, AdamState& z_state,
                              AdamState& theta_state) {
  require_same_shape(y, z, "fidelity_solve");
  require_same_shape(y, anchor, "fidelity_solve");
  if (!(lambda >= 0.0)) throw ParameterError("coupling weight must be nonnegative");
  if (settings.iterations < 1) throw ParameterError("fidelity_solve needs at least one iteration");

  const std::size_t n = y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> theta = parameters(op);
  z_state.lr = settings.eta_z;
  theta_state.lr = settings.eta_theta;
  Pcg64 check_rng(settings.check_seed, "monotone-check");

  FidelityResult result{{}, op, {}};
  ImageTensor upstream(y.height(), y.width(), y.channels());
  std::vector<double> grad_z(n);
  for (int j = 0; j < settings.iterations; ++j) {
    ForwardCache cache;
    const ImageTensor mz = forward(op, z, &cache);
    double data = 0.0, coupling = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - mz[i];
      const double c = z[i] - anchor[i];
      data += r * r;
      coupling += c * c;
      upstream[i] = -2.0 * r * inv_n;
    }
    const double loss = data * inv_n + lambda * coupling * inv_n;
    if (!std::isfinite(loss)) throw NonFiniteLoss(static_cast<std::size_t>(j), theta);
    result.losses.push_back(loss);
    if (loss < settings.loss_floor) continue;

    OperatorGradients grads = backward(op, z, cache, upstream);
    if (!settings.freeze_z) {
      for (std::size_t i = 0; i < n; ++i) grad_z[i] = grads.input[i] + 2.0 * lambda * (z[i] - anchor[i]) * inv_n;
      adam_step(z_state, z.values(), grad_z);
      for (double& v : z.values()) v = std::clamp(v, 0.0, 1.0);
    }
    clip_global_norm(grads.params, settings.grad_clip);
    adam_step(theta_state, theta, grads.params);
    set_parameters(op, theta);
    if (settings.check_monotone) check_order(op, check_rng, static_cast<std::size_t>(j));
  }
  result.z = std::move(z);
  result.op = std::move(op);
  return result;
}

namespace {

ImageTensor clamped_gaussian(const ImageTensor& shape, std::uint64_t seed, const char* stream) {
  Pcg64 rng(seed, stream);
  ImageTensor out(shape.height(), shape.width(), shape.channels());
  for (double& v : out.values()) v = std::clamp(rng.gaussian(), 0.0, 1.0);
  return out;
}

bool all_finite(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

RestoreReport restore(const ImageTensor& y, const SolverConfig& config,
                      const std::optional<ImageTensor>& ground_truth) {
  config.validate();
  if (y.empty()) throw ParameterError("restore: empty measurement");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= -kDomainSlack && y[i] <= 1.0 + kDomainSlack)) {
      throw DomainError("restore: measurement value at index " + std::to_string(i) + " outside [0,1]");
    }
  }
  if (ground_truth) require_same_shape(y, *ground_truth, "restore ground truth");

  const CouplingSchedule schedule = make_schedule(config.total_steps, config.outer_iterations, config.lambda);
  Operator op = make_operator(config.op, config.seed);
  if (config.output_affine) {
    if (auto* camb = std::get_if<CambOperator>(&op)) camb->enable_output_affine();
  }

  ImageTensor z = clamped_gaussian(y, config.seed, "z-init");
  ImageTensor anchor = clamped_gaussian(y, config.seed, "x-init");
  Pcg64 noise_rng(config.seed, "prior-noise");

  RestoreReport report;
  report.op = op;
  if (ground_truth) {
    report.validation_trace.emplace();
    report.psnr_trace.emplace();
  }

  FidelitySettings settings;
  settings.iterations = config.inner_iterations;
  settings.eta_z = config.eta_z;
  settings.eta_theta = config.eta_theta;
  settings.grad_clip = config.grad_clip;
  settings.check_monotone = config.check_monotone;

  for (int i = 0; i < config.outer_iterations; ++i) {
    const int t = schedule.timesteps[static_cast<std::size_t>(i)];
    const double lambda = schedule.lambdas[static_cast<std::size_t>(i)];
    settings.check_seed = config.seed + static_cast<std::uint64_t>(i);

    // Fresh optimizer state for every outer iteration.
    AdamState z_state(y.size(), config.eta_z);
    AdamState theta_state(parameters(op).size(), config.eta_theta);
    FidelityResult fit;
    try {
      fit = fidelity_solve(y, std::move(z), std::move(op), anchor, lambda, settings, z_state, theta_state);
    } catch (const NonFiniteLoss& e) {
      throw RestoreAborted(std::string("restore aborted at outer iteration ") + std::to_string(i) + ": " + e.what(),
                           report);
    }
    z = std::move(fit.z);
    op = std::move(fit.op);
    report.loss_trace.insert(report.loss_trace.end(), fit.losses.begin(), fit.losses.end());

    const double fidelity = mse(y, forward(op, z));
    report.timesteps.push_back(t);
    report.fidelity_trace.push_back(fidelity);
    bool finite = all_finite(fidelity);
    if (ground_truth) {
      const double validation = mse(y, forward(op, *ground_truth));
      report.validation_trace->push_back(validation);
      report.psnr_trace->push_back(psnr(z, *ground_truth));
      finite = finite && all_finite(validation);
    }
    report.restored = z;
    report.op = op;
    if (!finite) {
      throw RestoreAborted("restore aborted: non-finite trace entry at outer iteration " + std::to_string(i),
                           report);
    }

    // Prior step: re-noise z to the current level and denoise; the result anchors the next solve.
    const double amplitude = noise_amplitude(schedule, t);
    ImageTensor noisy = z;
    for (double& v : noisy.values()) v += amplitude * noise_rng.gaussian();
    anchor = denoise(config.denoiser, noisy, amplitude);
  }
  return report;
}

std::string trace_csv(const RestoreReport& report) {
  std::ostringstream os;
  os << "iter,t,fidelity,validation,psnr\n";
  char buf[64];
  for (std::size_t i = 0; i < report.fidelity_trace.size(); ++i) {
    os << i << "," << report.timesteps[i] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.fidelity_trace[i]);
    os << buf << ",";
    if (report.validation_trace) {
      std::snprintf(buf, sizeof buf, "%.17g", (*report.validation_trace)[i]);
      os << buf;
    }
    os << ",";
    if (report.psnr_trace) {
      const double p = (*report.psnr_trace)[i];
      if (std::isinf(p)) {
        os << "inf";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", p);
        os << buf;
      }
    }
    os << "\n";
  }
  return os.str();
}

void write_trace_csv(const RestoreReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << trace_csv(report);
  if (!out) throw IoError("error writing '" + path + "'");
}

std::vector<double> sample_points(int points, std::uint64_t seed) {
  if (points < 2) throw ParameterError("need at least two sample points");
  Pcg64 rng(seed, "samples");
  std::vector<double> z{0.0, 1.0};
  for (int i = 2; i < points; ++i) z.push_back(rng.uniform());
  std::sort(z.begin(), z.end());
  return z;
}

std::vector<std::pair<double, double>> validate_samples(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2) throw ParameterError("curve fitting needs at least two samples");
  for (const auto& [z, f] : samples) {
    if (!(z >= 0.0 && z <= 1.0) || !(f >= 0.0 && f <= 1.0)) {
      throw ParameterError("curve samples must lie in [0,1] x [0,1]");
    }
  }
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].second < samples[i - 1].second ||
        (samples[i].first == samples[i - 1].first && samples[i].second != samples[i - 1].second)) {
      std::ostringstream os;
      os << "curve samples are not monotone near z = " << samples[i].first;
      throw ParameterError(os.str());
    }
  }
  return samples;
}

double sup_error_against_samples(const Operator& op, std::span<const std::pair<double, double>> samples) {
  ImageTensor grid(1, kCurveGridPoints, 1);
  for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
    grid[g] = static_cast<double>(g) / static_cast<double>(kCurveGridPoints - 1);
  }
  const ImageTensor fitted = forward(op, grid);
  double worst = 0.0;
  for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
    const double x = grid[g];
    double target;
    if (x <= samples.front().first) {
      target = samples.front().second;
    } else if (x >= samples.back().first) {
      target = samples.back().second;
    } else {
      const auto it = std::upper_bound(samples.begin(), samples.end(), x,
                                       [](double v, const auto& s) { return v < s.first; });
      const auto& [x1, y1] = *it;
      const auto& [x0, y0] = *(it - 1);
      target = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }
    worst = std::max(worst, std::abs(fitted[g] - target));
  }
  return worst;
}

CurveFit fit_curve(std::vector<std::pair<double, double>> samples, int degree, int depth, int steps,
                   double eta, std::uint64_t /*seed*/) {
  samples = validate_samples(std::move(samples));
  if (steps < 0) throw ParameterError("fit_curve steps must be nonnegative");
  ImageTensor z(1, samples.size(), 1), target(1, samples.size(), 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    z[i] = samples[i].first;
    target[i] = samples[i].second;
  }
  CurveFit fit{CambOperator::identity(degree, depth), 0.0, {}};
  if (steps > 0) {
    FidelitySettings settings;
    settings.iterations = steps;
    settings.eta_theta = eta;
    settings.freeze_z = true;
    AdamState z_state, theta_state;
    FidelityResult r = fidelity_solve(target, z, fit.op, z, 0.0, settings, z_state, theta_state);
    fit.op = std::get<CambOperator>(r.op);
    fit.losses = std::move(r.losses);
  }
  fit.sup_error = sup_error_against_samples(fit.op, samples);
  return fit;
}

}  // namespace camb
