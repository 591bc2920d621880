#include "camb/schedule.hpp"

#include <cmath>
#include <string>

#include "camb/error.hpp"

namespace camb {

double CouplingSchedule::alpha_bar(int t) const {
  if (t < 1 || t > total_steps) {
    throw ParameterError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(total_steps) + "]");
  }
  return alpha_bars[static_cast<std::size_t>(t - 1)];
}

CouplingSchedule make_schedule(int total_steps, int iterations, LambdaRule rule) {
  if (total_steps < 2) throw ParameterError("schedule needs T >= 2");
  if (iterations < 1 || iterations > total_steps) {
    throw ParameterError("schedule needs 1 <= I <= T, got I = " + std::to_string(iterations));
  }
  if (iterations == total_steps) {
    throw ParameterError("schedule needs I < T: I + 1 distinct timesteps must fit in [1, T]");
  }
  if (!(rule.scale > 0.0) || !std::isfinite(rule.scale)) {
    throw ParameterError("coupling weight scale must be positive and finite");
  }

  CouplingSchedule s;
  s.total_steps = total_steps;
  s.iterations = iterations;
  s.betas.resize(static_cast<std::size_t>(total_steps));
  s.alpha_bars.resize(static_cast<std::size_t>(total_steps));
  double product = 1.0;
  for (int t = 1; t <= total_steps; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(total_steps - 1);
    const double beta = kBetaStart + (kBetaEnd - kBetaStart) * frac;
    product *= 1.0 - beta;
    s.betas[t - 1] = beta;
    s.alpha_bars[t - 1] = product;
  }

  s.timesteps.resize(static_cast<std::size_t>(iterations) + 1);
  const double spacing = static_cast<double>(total_steps - 1) / static_cast<double>(iterations);
  for (int i = 0; i <= iterations; ++i) {
    int t = static_cast<int>(std::floor(total_steps - i * spacing + 0.5));
    if (i > 0 && t >= s.timesteps[i - 1]) t = s.timesteps[i - 1] - 1;
    s.timesteps[i] = t;
  }

  s.lambdas.resize(s.timesteps.size());
  for (std::size_t i = 0; i < s.timesteps.size(); ++i) {
    if (rule.kind == LambdaRule::Kind::constant) {
      s.lambdas[i] = rule.scale;
    } else {
      const double ab = s.alpha_bar(s.timesteps[i]);
      s.lambdas[i] = rule.scale * ab / (1.0 - ab);
    }
  }
  return s;
}

double noise_amplitude(const CouplingSchedule& schedule, int t) {
  return std::sqrt(1.0 - schedule.alpha_bar(t));
}

}  // namespace camb
