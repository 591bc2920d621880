#include "camb/camb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "camb/error.hpp"
#include "camb/rng.hpp"

namespace camb {

namespace {

using nlohmann::json;

struct PreparedCascade {
  std::vector<std::vector<double>> coefficients;
  std::vector<std::vector<double>> probabilities;
  std::vector<std::vector<double>> binom;
  std::vector<std::vector<double>> binom_lower;
  std::vector<kernels::LayerView> views;

  explicit PreparedCascade(const std::vector<MbpLayer>& layers) {
    for (const MbpLayer& l : layers) {
      coefficients.push_back(l.coefficients());
      probabilities.push_back(l.probabilities());
      binom.push_back(binomial_row(l.degree()));
      binom_lower.push_back(binomial_row(l.degree() - 1));
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
      views.push_back({layers[k].degree(), coefficients[k].data(), probabilities[k].data(),
                       binom[k].data(), binom_lower[k].data()});
    }
  }
};

// Copies the image values, clamping those within the domain slack.
std::vector<double> checked_inputs(const ImageTensor& img) {
  std::vector<double> in(img.values().begin(), img.values().end());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    if (!(v >= -kDomainSlack && v <= 1.0 + kDomainSlack)) {
      std::ostringstream os;
      os.precision(17);
      os << "pixel " << i << " has value " << v << " outside the operator domain [0,1]";
      throw DomainError(os.str());
    }
    in[i] = std::clamp(v, 0.0, 1.0);
  }
  return in;
}

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// CambOperator

CambOperator::CambOperator(std::vector<MbpLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ParameterError("CaMB operator needs at least one layer");
}

CambOperator CambOperator::identity(int degree, int depth) {
  if (degree < 1 || depth < 1) throw ParameterError("CaMB shape requires N >= 1 and K >= 1");
  return CambOperator(std::vector<MbpLayer>(static_cast<std::size_t>(depth), MbpLayer(degree)));
}

bool CambOperator::uniform_degree() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [&](const MbpLayer& l) { return l.degree() == degree(); });
}

void CambOperator::enable_output_affine(double log_scale, double offset) {
  output_affine_ = true;
  out_log_scale_ = log_scale;
  out_offset_ = offset;
}

std::size_t CambOperator::raw_parameter_size() const {
  std::size_t n = output_affine_ ? 2 : 0;
  for (const MbpLayer& l : layers_) n += l.weights().size();
  return n;
}

std::vector<double> CambOperator::parameters() const {
  std::vector<double> p;
  p.reserve(raw_parameter_size());
  for (const MbpLayer& l : layers_) p.insert(p.end(), l.weights().begin(), l.weights().end());
  if (output_affine_) {
    p.push_back(out_log_scale_);
    p.push_back(out_offset_);
  }
  return p;
}

void CambOperator::set_parameters(std::span<const double> params) {
  if (params.size() != raw_parameter_size()) {
    throw ParameterError("CaMB parameter vector has length " + std::to_string(params.size()) +
                         ", expected " + std::to_string(raw_parameter_size()));
  }
  std::size_t pos = 0;
  for (MbpLayer& l : layers_) {
    const std::size_t n = l.weights().size();
    l.set_weights(std::vector<double>(params.begin() + pos, params.begin() + pos + n));
    pos += n;
  }
  if (output_affine_) {
    out_log_scale_ = params[pos];
    out_offset_ = params[pos + 1];
  }
}

std::size_t CambOperator::param_count() const {
  std::size_t n = output_affine_ ? 2 : 0;
  for (const MbpLayer& l : layers_) n += l.param_count();
  return n;
}

double CambOperator::eval(double z) const {
  ImageTensor one(1, 1, 1, clamp_domain(z));
  return forward(one)[0];
}

ImageTensor CambOperator::forward(const ImageTensor& img, ForwardCache* cache) const {
  const std::vector<double> in = checked_inputs(img);
  const std::size_t count = in.size();
  const PreparedCascade prepared(layers_);
  std::vector<double> out(count);
  double* activations = nullptr;
  if (cache) {
    cache->values.assign((layers_.size() + 1) * count, 0.0);
    activations = cache->values.data();
  }
  kernels::active().forward(prepared.views, in.data(), out.data(), activations, count);
  if (cache) std::copy(out.begin(), out.end(), cache->values.begin() + layers_.size() * count);
  if (output_affine_) {
    const double scale = std::exp(out_log_scale_);
    for (double& v : out) v = std::clamp(scale * v + out_offset_, 0.0, 1.0);
  }
  return ImageTensor(img.height(), img.width(), img.channels(), std::move(out));
}

OperatorGradients CambOperator::backward(const ImageTensor& img, const ForwardCache& cache,
                                         const ImageTensor& upstream) const {
  require_same_shape(img, upstream, "CaMB backward");
  const std::size_t count = img.size();
  if (cache.values.size() != (layers_.size() + 1) * count) {
    throw ParameterError("CaMB backward: forward cache does not match the image");
  }
  const double* cascade_out = cache.values.data() + layers_.size() * count;

  std::vector<double> up(upstream.values().begin(), upstream.values().end());
  double grad_log_scale = 0.0;
  double grad_offset = 0.0;
  if (output_affine_) {
    const double scale = std::exp(out_log_scale_);
    for (std::size_t i = 0; i < count; ++i) {
      const double pre = scale * cascade_out[i] + out_offset_;
      if (pre > 0.0 && pre < 1.0) {
        grad_log_scale += up[i] * scale * cascade_out[i];
        grad_offset += up[i];
        up[i] *= scale;
      } else {
        up[i] = 0.0;
      }
    }
  }

  const PreparedCascade prepared(layers_);
  std::size_t total = 0;
  for (const MbpLayer& l : layers_) total += static_cast<std::size_t>(l.degree()) + 1;
  std::vector<double> grad_coefficients(total, 0.0);
  std::vector<double> grad_in(count);
  kernels::active().backward(prepared.views, cache.values.data(), up.data(), grad_in.data(),
                             grad_coefficients.data(), count);

  OperatorGradients grads;
  grads.input = ImageTensor(img.height(), img.width(), img.channels(), std::move(grad_in));
  grads.params.reserve(raw_parameter_size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const std::vector<double> gw =
        coefficient_grad_to_weights(prepared.probabilities[k], grad_coefficients.data() + offset);
    grads.params.insert(grads.params.end(), gw.begin(), gw.end());
    offset += static_cast<std::size_t>(layers_[k].degree()) + 1;
  }
  if (output_affine_) {
    grads.params.push_back(grad_log_scale);
    grads.params.push_back(grad_offset);
  }
  return grads;
}

OperatorGradients CambOperator::backward(const ImageTensor& img, const ImageTensor& upstream) const {
  ForwardCache cache;
  forward(img, &cache);
  return backward(img, cache, upstream);
}

// ---------------------------------------------------------------------------
// AffineOperator

AffineOperator AffineOperator::from_alpha(double alpha, double beta) {
  if (!(alpha > 0.0)) throw ParameterError("affine operator requires alpha > 0");
  return AffineOperator(std::log(alpha), beta);
}

double AffineOperator::alpha() const { return std::exp(log_alpha_); }

void AffineOperator::set_parameters(std::span<const double> params) {
  if (params.size() != 2) throw ParameterError("affine operator takes exactly 2 parameters");
  log_alpha_ = params[0];
  beta_ = params[1];
}

double AffineOperator::eval(double v) const { return std::clamp(alpha() * v + beta_, 0.0, 1.0); }

ImageTensor AffineOperator::forward(const ImageTensor& img, ForwardCache* cache) const {
  const double a = alpha();
  ImageTensor out = img;
  if (cache) cache->values.resize(img.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pre = a * img[i] + beta_;
    if (cache) cache->values[i] = pre;
    out[i] = std::clamp(pre, 0.0, 1.0);
  }
  return out;
}

OperatorGradients AffineOperator::backward(const ImageTensor& img, const ForwardCache& cache,
                                           const ImageTensor& upstream) const {
  require_same_shape(img, upstream, "affine backward");
  if (cache.values.size() != img.size()) {
    throw ParameterError("affine backward: forward cache does not match the image");
  }
  const double a = alpha();
  OperatorGradients grads{ImageTensor(img.height(), img.width(), img.channels()), {0.0, 0.0}};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double pre = cache.values[i];
    if (pre > 0.0 && pre < 1.0) {
      grads.input[i] = upstream[i] * a;
      grads.params[0] += upstream[i] * a * img[i];
      grads.params[1] += upstream[i];
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// MonoMlpOperator

MonoMlpOperator::MonoMlpOperator(std::vector<std::size_t> hidden_widths, std::uint64_t seed) {
  if (hidden_widths.empty()) throw ParameterError("monotone MLP needs at least one hidden layer");
  std::vector<std::size_t> widths{1};
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw ParameterError("monotone MLP widths must be positive");
    widths.push_back(w);
  }
  widths.push_back(1);

  Pcg64 rng(seed, "mlp-init");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    layer.fan_in = widths[l];
    layer.fan_out = widths[l + 1];
    const bool first = l == 0;
    const bool last = l + 2 == widths.size();
    // First layer: steep units with centers spread over [0,1]; later layers
    // average their inputs.
    const double base = first ? std::log(4.0) : std::log((last ? 4.0 : 2.0) / layer.fan_in);
    layer.raw_weights.resize(layer.fan_in * layer.fan_out);
    for (double& w : layer.raw_weights) w = base + 0.1 * rng.gaussian();
    layer.biases.assign(layer.fan_out, 0.0);
    if (first) {
      for (std::size_t j = 0; j < layer.fan_out; ++j) {
        const double center = (static_cast<double>(j) + 0.5) / static_cast<double>(layer.fan_out);
        layer.biases[j] = -std::exp(layer.raw_weights[j]) * center;
      }
    }
    layers_.push_back(std::move(layer));
  }
}

MonoMlpOperator::MonoMlpOperator(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw ParameterError("monotone MLP needs at least one hidden layer");
  if (layers_.front().fan_in != 1 || layers_.back().fan_out != 1) {
    throw ParameterError("monotone MLP must map a scalar to a scalar");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.raw_weights.size() != layer.fan_in * layer.fan_out ||
        layer.biases.size() != layer.fan_out || (l > 0 && layers_[l - 1].fan_out != layer.fan_in)) {
      throw ParameterError("monotone MLP layer " + std::to_string(l) + " has inconsistent sizes");
    }
  }
}

std::vector<std::size_t> MonoMlpOperator::widths() const {
  std::vector<std::size_t> w{layers_.front().fan_in};
  for (const Layer& l : layers_) w.push_back(l.fan_out);
  return w;
}

std::vector<double> MonoMlpOperator::parameters() const {
  std::vector<double> p;
  for (const Layer& l : layers_) {
    p.insert(p.end(), l.raw_weights.begin(), l.raw_weights.end());
    p.insert(p.end(), l.biases.begin(), l.biases.end());
  }
  return p;
}

void MonoMlpOperator::set_parameters(std::span<const double> params) {
  if (params.size() != param_count()) {
    throw ParameterError("monotone MLP parameter vector has length " + std::to_string(params.size()) +
                         ", expected " + std::to_string(param_count()));
  }
  std::size_t pos = 0;
  for (Layer& l : layers_) {
    std::copy_n(params.begin() + pos, l.raw_weights.size(), l.raw_weights.begin());
    pos += l.raw_weights.size();
    std::copy_n(params.begin() + pos, l.biases.size(), l.biases.begin());
    pos += l.biases.size();
  }
}

std::size_t MonoMlpOperator::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.fan_in * l.fan_out + l.fan_out;
  return n;
}

double MonoMlpOperator::eval(double v) const {
  ImageTensor one(1, 1, 1, v);
  return forward(one)[0];
}

namespace {

// Activations per pixel: every hidden layer's tanh outputs, then the final pre-sigmoid s.
std::size_t activation_width(const std::vector<MonoMlpOperator::Layer>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.fan_out;
  return n;
}

std::vector<std::vector<double>> positive_weights(const std::vector<MonoMlpOperator::Layer>& layers) {
  std::vector<std::vector<double>> w;
  for (const auto& l : layers) {
    std::vector<double> e(l.raw_weights.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(l.raw_weights[i]);
    w.push_back(std::move(e));
  }
  return w;
}

double squash(double s) {
  return MonoMlpOperator::kOutputStretch * sigmoid(s) - MonoMlpOperator::kOutputShift;
}

}  // namespace

ImageTensor MonoMlpOperator::forward(const ImageTensor& img, ForwardCache* cache) const {
  const auto weights = positive_weights(layers_);
  const std::size_t width = activation_width(layers_);
  std::vector<double> act(width);
  if (cache) cache->values.resize(width * img.size());
  ImageTensor out = img;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double* input = &img.values()[i];
    std::size_t pos = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      const bool last = l + 1 == layers_.size();
      for (std::size_t o = 0; o < layer.fan_out; ++o) {
        double a = layer.biases[o];
        for (std::size_t j = 0; j < layer.fan_in; ++j) a += weights[l][o * layer.fan_in + j] * input[j];
        act[pos + o] = last ? a : std::tanh(a);
      }
      input = &act[pos];
      pos += layer.fan_out;
    }
    out[i] = std::clamp(squash(act[width - 1]), 0.0, 1.0);
    if (cache) std::copy(act.begin(), act.end(), cache->values.begin() + i * width);
  }
  return out;
}

OperatorGradients MonoMlpOperator::backward(const ImageTensor& img, const ForwardCache& cache,
                                            const ImageTensor& upstream) const {
  require_same_shape(img, upstream, "monotone MLP backward");
  const std::size_t width = activation_width(layers_);
  if (cache.values.size() != width * img.size()) {
    throw ParameterError("monotone MLP backward: forward cache does not match the image");
  }
  const auto weights = positive_weights(layers_);
  std::vector<std::size_t> offsets;  // start of each layer's outputs in the activation row
  std::vector<std::size_t> param_offsets;
  {
    std::size_t pos = 0, ppos = 0;
    for (const Layer& l : layers_) {
      offsets.push_back(pos);
      param_offsets.push_back(ppos);
      pos += l.fan_out;
      ppos += l.fan_in * l.fan_out + l.fan_out;
    }
  }

  OperatorGradients grads{ImageTensor(img.height(), img.width(), img.channels()),
                          std::vector<double>(param_count(), 0.0)};
  std::vector<double> delta(width);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double* act = cache.values.data() + i * width;
    const double s = act[width - 1];
    const double sig = sigmoid(s);
    const double pre = kOutputStretch * sig - kOutputShift;
    if (!(pre > 0.0 && pre < 1.0) || upstream[i] == 0.0) continue;
    std::fill(delta.begin(), delta.end(), 0.0);
    delta[width - 1] = upstream[i] * kOutputStretch * sig * (1.0 - sig);

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      const bool last = l + 1 == layers_.size();
      double* g = grads.params.data() + param_offsets[l];
      for (std::size_t o = 0; o < layer.fan_out; ++o) {
        const double y = act[offsets[l] + o];
        // delta holds d loss / d output; convert to d loss / d pre-activation.
        const double d = last ? delta[offsets[l] + o] : delta[offsets[l] + o] * (1.0 - y * y);
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < layer.fan_in; ++j) {
          const double x = l == 0 ? img[i] : act[offsets[l - 1] + j];
          const double w = weights[l][o * layer.fan_in + j];
          g[o * layer.fan_in + j] += d * x * w;  // dW/draw = W
          if (l == 0) {
            grads.input[i] += d * w;
          } else {
            delta[offsets[l - 1] + j] += d * w;
          }
        }
        g[layer.fan_in * layer.fan_out + o] += d;
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Variant helpers

std::string kind_name(const Operator& op) {
  switch (op.index()) {
    case 0:
      return "camb";
    case 1:
      return "affine";
    default:
      return "monomlp";
  }
}

std::size_t param_count(const Operator& op) {
  return std::visit([](const auto& o) { return o.param_count(); }, op);
}

std::vector<double> parameters(const Operator& op) {
  return std::visit([](const auto& o) { return o.parameters(); }, op);
}

void set_parameters(Operator& op, std::span<const double> params) {
  std::visit([&](auto& o) { o.set_parameters(params); }, op);
}

double eval(const Operator& op, double v) {
  return std::visit([&](const auto& o) { return o.eval(v); }, op);
}

ImageTensor forward(const Operator& op, const ImageTensor& img, ForwardCache* cache) {
  return std::visit([&](const auto& o) { return o.forward(img, cache); }, op);
}

OperatorGradients backward(const Operator& op, const ImageTensor& img, const ForwardCache& cache,
                           const ImageTensor& upstream) {
  return std::visit([&](const auto& o) { return o.backward(img, cache, upstream); }, op);
}

OperatorGradients backward(const Operator& op, const ImageTensor& img, const ImageTensor& upstream) {
  ForwardCache cache;
  forward(op, img, &cache);
  return backward(op, img, cache, upstream);
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    parts.emplace_back(text.substr(start, end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

int parse_positive(const std::string& s, std::string_view context) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) {
    throw ParameterError("invalid operator shorthand '" + std::string(context) + "'");
  }
  return value;
}

}  // namespace

Operator make_operator(std::string_view shorthand, std::uint64_t seed) {
  const std::vector<std::string> parts = split(shorthand, ':');
  if (parts[0] == "camb" && parts.size() == 3) {
    return CambOperator::identity(parse_positive(parts[1], shorthand), parse_positive(parts[2], shorthand));
  }
  if (parts[0] == "affine" && parts.size() == 1) return AffineOperator{};
  if (parts[0] == "monomlp" && parts.size() <= 2) {
    std::vector<std::size_t> widths{16, 16};
    if (parts.size() == 2) {
      widths.clear();
      for (const std::string& w : split(parts[1], ',')) widths.push_back(parse_positive(w, shorthand));
    }
    return MonoMlpOperator(widths, seed);
  }
  throw ParameterError("invalid operator shorthand '" + std::string(shorthand) +
                       "' (expected camb:N:K, affine or monomlp:w1,w2,...)");
}

std::string operator_to_json(const Operator& op) {
  json j;
  j["kind"] = kind_name(op);
  if (const auto* camb = std::get_if<CambOperator>(&op)) {
    if (camb->uniform_degree()) j["degree"] = camb->degree();
    j["layers"] = json::array();
    for (const MbpLayer& l : camb->layers()) j["layers"].push_back(l.weights());
    if (camb->output_affine_enabled()) {
      j["output_affine"] = {camb->output_log_scale(), camb->output_offset()};
    }
  } else if (const auto* affine = std::get_if<AffineOperator>(&op)) {
    j["log_alpha"] = affine->log_alpha();
    j["beta"] = affine->beta();
    j["alpha"] = affine->alpha();
  } else {
    const auto& mlp = std::get<MonoMlpOperator>(op);
    j["widths"] = mlp.widths();
    j["layers"] = json::array();
    for (const auto& l : mlp.layers()) {
      j["layers"].push_back({{"raw_weights", l.raw_weights}, {"biases", l.biases}});
    }
  }
  return j.dump(2);
}

Operator operator_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "camb") {
      std::vector<MbpLayer> layers;
      for (const auto& w : j.at("layers")) layers.emplace_back(w.get<std::vector<double>>());
      if (layers.empty()) throw FormatError("camb operator needs at least one layer");
      if (j.contains("degree")) {
        const int degree = j.at("degree").get<int>();
        for (const auto& layer : layers) {
          if (layer.degree() != degree) {
            throw FormatError("layer of degree " + std::to_string(layer.degree()) + " in a degree " +
                              std::to_string(degree) + " operator");
          }
        }
      }
      CambOperator op(std::move(layers));
      if (j.contains("output_affine")) {
        const auto pair = j.at("output_affine").get<std::vector<double>>();
        if (pair.size() != 2) throw FormatError("output_affine must hold two numbers");
        op.enable_output_affine(pair[0], pair[1]);
      }
      return op;
    }
    if (kind == "affine") return AffineOperator(j.at("log_alpha").get<double>(), j.at("beta").get<double>());
    if (kind == "monomlp") {
      const auto widths = j.at("widths").get<std::vector<std::size_t>>();
      const auto& jl = j.at("layers");
      if (widths.size() != jl.size() + 1) throw FormatError("monomlp widths do not match layers");
      std::vector<MonoMlpOperator::Layer> layers;
      for (std::size_t l = 0; l < jl.size(); ++l) {
        layers.push_back({widths[l], widths[l + 1], jl[l].at("raw_weights").get<std::vector<double>>(),
                          jl[l].at("biases").get<std::vector<double>>()});
      }
      return MonoMlpOperator(std::move(layers));
    }
    throw FormatError("unknown operator kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed operator JSON: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid operator JSON: ") + e.what());
  }
}

}  // namespace camb
