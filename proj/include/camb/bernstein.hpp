#pragma once

#include <cstddef>
#include <vector>

namespace camb {

// Inputs may stray this far outside [0,1] and are clamped; farther is a DomainError.
inline constexpr double kDomainSlack = 1e-9;

// Clamps z into [0,1] or throws DomainError.
double clamp_domain(double z);

// C(n,k): exact integer arithmetic up to n = 60, multiplicative recurrence above.
double binomial(int n, int k);

// Row of binomial coefficients C(n,0..n).
std::vector<double> binomial_row(int n);

// Bernstein basis b_{k,n}(z), k = 0..n. Nonnegative; sums to 1.
std::vector<double> basis(int degree, double z);

// One monotone Bernstein polynomial layer.
//
// The N unconstrained weights w go through a softmax p = softmax(w) whose
// cumulative sum gives the coefficients 0 = b_0 < b_1 < ... < b_N = 1, so the
// polynomial is strictly increasing on [0,1] and pins both endpoints. Equal
// weights give b_k = k/N, which reproduces the identity exactly.
class MbpLayer {
 public:
  explicit MbpLayer(int degree);
  explicit MbpLayer(std::vector<double> weights);

  int degree() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> weights);

  // softmax(w), computed with max-subtraction.
  std::vector<double> probabilities() const;
  // Length N+1, b_0 = 0 and b_N = 1 exactly.
  std::vector<double> coefficients() const;

  double eval(double z) const;
  double deriv_z(double z) const;
  // upstream * d eval / d w, exact chain rule through the softmax.
  std::vector<double> grad_w(double z, double upstream) const;

  // Effective degrees of freedom; the softmax is invariant to a common shift.
  std::size_t param_count() const { return weights_.size() - 1; }

 private:
  std::vector<double> weights_;
};

// Maps a gradient with respect to the coefficients b_0..b_N onto the weights.
// b_0 and b_N are constants, so their entries are ignored.
std::vector<double> coefficient_grad_to_weights(const std::vector<double>& probabilities,
                                                const double* grad_coefficients);

}  // namespace camb
