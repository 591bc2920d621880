#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "camb/bernstein.hpp"
#include "camb/kernels.hpp"
#include "camb/tensor.hpp"

namespace camb {

// Activations kept by a forward pass so the backward pass does not recompute them.
struct ForwardCache {
  std::vector<double> values;
};

struct OperatorGradients {
  ImageTensor input;           // d loss / d input, same shape as the image
  std::vector<double> params;  // d loss / d parameters, in parameters() order
};

// Composition of K monotone Bernstein layers applied element-wise, the first
// layer innermost. Endpoints stay pinned at 0 and 1 unless the optional output
// affine is enabled, which appends (log scale, offset) to the parameters and
// clamps the result to [0,1].
class CambOperator {
 public:
  explicit CambOperator(std::vector<MbpLayer> layers);

  // K layers of degree N with zero weights: the identity map.
  static CambOperator identity(int degree, int depth);

  const std::vector<MbpLayer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  // Degree of the first layer; layers may mix degrees.
  int degree() const { return layers_.front().degree(); }
  bool uniform_degree() const;

  bool output_affine_enabled() const { return output_affine_; }
  void enable_output_affine(double log_scale = 0.0, double offset = 0.0);
  double output_log_scale() const { return out_log_scale_; }
  double output_offset() const { return out_offset_; }

  // All layer weights concatenated (sum of N_k), then the output affine pair if enabled.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);
  std::size_t raw_parameter_size() const;
  // (N-1) * K effective degrees of freedom, plus 2 for the output affine.
  std::size_t param_count() const;

  double eval(double z) const;
  ImageTensor forward(const ImageTensor& img, ForwardCache* cache = nullptr) const;
  OperatorGradients backward(const ImageTensor& img, const ForwardCache& cache,
                             const ImageTensor& upstream) const;
  OperatorGradients backward(const ImageTensor& img, const ImageTensor& upstream) const;

 private:
  std::vector<MbpLayer> layers_;
  bool output_affine_ = false;
  double out_log_scale_ = 0.0;
  double out_offset_ = 0.0;
};

// v -> clamp(alpha * v + beta, 0, 1), alpha = exp(log_alpha) > 0.
class AffineOperator {
 public:
  AffineOperator() = default;
  AffineOperator(double log_alpha, double beta) : log_alpha_(log_alpha), beta_(beta) {}
  static AffineOperator from_alpha(double alpha, double beta);

  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  double beta() const { return beta_; }

  std::vector<double> parameters() const { return {log_alpha_, beta_}; }
  void set_parameters(std::span<const double> params);
  std::size_t param_count() const { return 2; }

  double eval(double v) const;
  ImageTensor forward(const ImageTensor& img, ForwardCache* cache = nullptr) const;
  OperatorGradients backward(const ImageTensor& img, const ForwardCache& cache,
                             const ImageTensor& upstream) const;

 private:
  double log_alpha_ = 0.0;
  double beta_ = 0.0;
};

// Scalar MLP with positive weights (exp of raw parameters) and tanh hidden
// units. The output is 1.1 * sigmoid(s) - 0.05 clamped to [0,1], so it can
// reach both endpoints. Monotone non-decreasing for any parameters.
class MonoMlpOperator {
 public:
  struct Layer {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::vector<double> raw_weights;  // fan_out x fan_in, row-major; weight = exp(raw)
    std::vector<double> biases;       // fan_out
  };

  // hidden_widths excludes the scalar input and output, e.g. {16, 16}.
  MonoMlpOperator(std::vector<std::size_t> hidden_widths, std::uint64_t seed);
  explicit MonoMlpOperator(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<std::size_t> widths() const;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);
  std::size_t param_count() const;

  double eval(double v) const;
  ImageTensor forward(const ImageTensor& img, ForwardCache* cache = nullptr) const;
  OperatorGradients backward(const ImageTensor& img, const ForwardCache& cache,
                             const ImageTensor& upstream) const;

  static constexpr double kOutputStretch = 1.1;
  static constexpr double kOutputShift = 0.05;

 private:
  std::vector<Layer> layers_;
};

using Operator = std::variant<CambOperator, AffineOperator, MonoMlpOperator>;

std::string kind_name(const Operator& op);
std::size_t param_count(const Operator& op);
std::vector<double> parameters(const Operator& op);
void set_parameters(Operator& op, std::span<const double> params);
double eval(const Operator& op, double v);
ImageTensor forward(const Operator& op, const ImageTensor& img, ForwardCache* cache = nullptr);
OperatorGradients backward(const Operator& op, const ImageTensor& img, const ForwardCache& cache,
                           const ImageTensor& upstream);
OperatorGradients backward(const Operator& op, const ImageTensor& img, const ImageTensor& upstream);

// Parses `camb:N:K`, `affine` or `monomlp:w1,w2,...` into an identity-initialized
// operator (MLP weights drawn from the seed). Throws ParameterError.
Operator make_operator(std::string_view shorthand, std::uint64_t seed = 0);

// JSON text: {"kind": ..., "degree": N, "layers": [[w...]...]} for CaMB. Doubles
// are written in shortest round-trip form, so parsing restores every bit.
std::string operator_to_json(const Operator& op);
Operator operator_from_json(std::string_view text);

}  // namespace camb
