#pragma once

#include <vector>

namespace camb {

struct LambdaRule {
  enum class Kind { constant, snr_scaled };
  Kind kind = Kind::constant;
  double scale = 0.3;

  static LambdaRule constant(double c) { return {Kind::constant, c}; }
  static LambdaRule snr_scaled(double c) { return {Kind::snr_scaled, c}; }
};

// Linear DDPM beta schedule (1e-4 to 0.02) with the outer-loop timesteps
// and fidelity-coupling weights. Timesteps are 1-based; index i of
// timesteps/lambdas refers to outer iteration i = 0..I.
struct CouplingSchedule {
  int total_steps = 0;  // T
  int iterations = 0;   // I
  std::vector<double> betas;       // betas[t-1]
  std::vector<double> alpha_bars;  // alpha_bars[t-1] = prod_{s<=t} (1 - beta_s)
  std::vector<int> timesteps;      // I+1 entries, strictly decreasing, t_0 = T, t_I = 1
  std::vector<double> lambdas;     // I+1 entries

  double alpha_bar(int t) const;

  bool operator==(const CouplingSchedule&) const = default;
};

inline constexpr double kBetaStart = 1e-4;
inline constexpr double kBetaEnd = 0.02;

// Requires T >= 2 and 1 <= I < T (I + 1 distinct timesteps must fit in 1..T).
CouplingSchedule make_schedule(int total_steps, int iterations, LambdaRule rule = {});

// sqrt(1 - alpha_bar_t) for 1 <= t <= T.
double noise_amplitude(const CouplingSchedule& schedule, int t);

}  // namespace camb
