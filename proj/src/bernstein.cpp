#include "camb/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "camb/error.hpp"

namespace camb {

double clamp_domain(double z) {
  if (!(z >= -kDomainSlack && z <= 1.0 + kDomainSlack)) {
    std::ostringstream os;
    os.precision(17);
    os << "input " << z << " outside the operator domain [0,1]";
    throw DomainError(os.str());
  }
  return std::clamp(z, 0.0, 1.0);
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  if (n <= 60) {
    // c * (n - i) is always divisible by (i + 1) and stays below 2^62 for n <= 60.
    std::uint64_t c = 1;
    for (int i = 0; i < k; ++i) c = c * static_cast<std::uint64_t>(n - i) / static_cast<std::uint64_t>(i + 1);
    return static_cast<double>(c);
  }
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return c;
}

std::vector<double> binomial_row(int n) {
  std::vector<double> row(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) row[k] = binomial(n, k);
  return row;
}

std::vector<double> basis(int degree, double z) {
  if (degree < 0) throw ParameterError("basis degree must be nonnegative");
  z = clamp_domain(z);
  const auto n = static_cast<std::size_t>(degree);
  std::vector<double> zp(n + 1), up(n + 1), out(n + 1);
  zp[0] = up[0] = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    zp[k] = zp[k - 1] * z;
    up[k] = up[k - 1] * (1.0 - z);
  }
  for (std::size_t k = 0; k <= n; ++k) out[k] = binomial(degree, static_cast<int>(k)) * zp[k] * up[n - k];
  return out;
}

MbpLayer::MbpLayer(int degree) {
  if (degree < 1) throw ParameterError("Bernstein layer degree must be at least 1");
  weights_.assign(static_cast<std::size_t>(degree), 0.0);
}

MbpLayer::MbpLayer(std::vector<double> weights) { set_weights(std::move(weights)); }

void MbpLayer::set_weights(std::vector<double> weights) {
  if (weights.empty()) throw ParameterError("Bernstein layer needs at least one weight");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ParameterError("Bernstein layer weights must be finite");
  }
  weights_ = std::move(weights);
}

std::vector<double> MbpLayer::probabilities() const {
  const double top = *std::max_element(weights_.begin(), weights_.end());
  std::vector<double> p(weights_.size());
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp(weights_[j] - top);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> MbpLayer::coefficients() const {
  const std::vector<double> p = probabilities();
  std::vector<double> beta(p.size() + 1);
  beta[0] = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) beta[k] = beta[k - 1] + p[k - 1];
  beta.back() = 1.0;
  return beta;
}

double MbpLayer::eval(double z) const {
  const std::vector<double> beta = coefficients();
  const std::vector<double> b = basis(degree(), z);
  double value = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) value += beta[k] * b[k];
  return std::clamp(value, 0.0, 1.0);
}

double MbpLayer::deriv_z(double z) const {
  const std::vector<double> p = probabilities();
  const std::vector<double> b = basis(degree() - 1, z);
  double slope = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) slope += p[k] * b[k];
  return static_cast<double>(degree()) * slope;
}

std::vector<double> MbpLayer::grad_w(double z, double upstream) const {
  const std::vector<double> b = basis(degree(), z);
  std::vector<double> grad_beta(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) grad_beta[k] = upstream * b[k];
  return coefficient_grad_to_weights(probabilities(), grad_beta.data());
}

std::vector<double> coefficient_grad_to_weights(const std::vector<double>& p,
                                                const double* grad_coefficients) {
  const std::size_t n = p.size();
  // b_k = sum_{j<=k} p_j for k = 1..N-1, so dL/dp_j = sum_{k=j..N-1} dL/db_k.
  std::vector<double> grad_p(n, 0.0);
  double running = 0.0;
  for (std::size_t j = n; j-- > 1;) {
    running += grad_coefficients[j];
    grad_p[j - 1] = running;
  }
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += p[j] * grad_p[j];
  std::vector<double> grad_w(n);
  for (std::size_t j = 0; j < n; ++j) grad_w[j] = p[j] * (grad_p[j] - mean);
  return grad_w;
}

}  // namespace camb
