#include "camb/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "camb/bernstein.hpp"
#include "camb/error.hpp"
#include "camb/priors.hpp"
#include "camb/rng.hpp"

namespace camb {

namespace curves {

Piecewise::Piecewise(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw ParameterError("piecewise curve needs at least two knots");
  if (knots_.front() != std::pair{0.0, 0.0} || knots_.back() != std::pair{1.0, 1.0}) {
    throw ParameterError("piecewise curve must start at (0,0) and end at (1,1)");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i].first > knots_[i - 1].first)) {
      throw ParameterError("piecewise knot abscissae must be strictly increasing");
    }
    if (!(knots_[i].second >= knots_[i - 1].second)) {
      throw ParameterError("piecewise knot ordinates must be sorted (non-decreasing)");
    }
  }
}

double Piecewise::operator()(double v) const {
  v = std::clamp(v, 0.0, 1.0);
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), v,
                                   [](double x, const auto& k) { return x < k.first; });
  if (it == knots_.end()) return knots_.back().second;
  const auto& [x1, y1] = *it;
  const auto& [x0, y0] = *(it - 1);
  return y0 + (y1 - y0) * (v - x0) / (x1 - x0);
}

}  // namespace curves

namespace {

double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

}  // namespace

double apply_curve(const Curve& curve, double v) {
  struct Visitor {
    double v;
    double operator()(const curves::Gamma& g) const { return std::pow(v, g.exponent); }
    double operator()(const curves::HdrClip&) const { return std::clamp(2.0 * v - 0.5, 0.0, 1.0); }
    double operator()(const curves::Sigmoid& s) const {
      const double lo = logistic(-s.slope * s.center);
      const double hi = logistic(s.slope * (1.0 - s.center));
      return (logistic(s.slope * (v - s.center)) - lo) / (hi - lo);
    }
    double operator()(const curves::Piecewise& p) const { return p(v); }
  };
  return std::visit(Visitor{v}, curve);
}

ImageTensor degrade(const ImageTensor& img, const DegradeSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
  ImageTensor out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = img[i];
    if (!(v >= -kDomainSlack && v <= 1.0 + kDomainSlack)) {
      std::ostringstream os;
      os << "degrade: pixel " << i << " value " << v << " outside [0,1]";
      throw DomainError(os.str());
    }
    out[i] = apply_curve(spec.curve, std::clamp(v, 0.0, 1.0));
  }
  return clamp_unit(add_noise(out, spec.sigma, spec.seed));
}

DegradeSpec make_random_monotone(std::uint64_t seed, int knot_count, double sigma) {
  if (knot_count < 2) throw ParameterError("random monotone curve needs knot_count >= 2");
  Pcg64 rng(seed, "curve");
  std::vector<double> ordinates(static_cast<std::size_t>(knot_count - 2));
  for (double& y : ordinates) y = rng.uniform();
  std::sort(ordinates.begin(), ordinates.end());
  std::vector<std::pair<double, double>> knots;
  knots.emplace_back(0.0, 0.0);
  for (std::size_t i = 0; i < ordinates.size(); ++i) {
    knots.emplace_back(static_cast<double>(i + 1) / (knot_count - 1), ordinates[i]);
  }
  knots.emplace_back(1.0, 1.0);
  return DegradeSpec{curves::Piecewise(std::move(knots)), sigma, seed};
}

ImageTensor make_scene(std::uint64_t seed, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ParameterError("scene dimensions must be positive");
  Pcg64 rng(seed, "scene");
  const double a = rng.uniform();
  const double gx = (rng.uniform() - 0.5) * 0.6, gy = (rng.uniform() - 0.5) * 0.6;
  const double base = 0.2 + 0.6 * a;
  ImageTensor img(height, width, 1);
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double u = (c + 0.5) / w - 0.5, v = (r + 0.5) / h - 0.5;
      img.at(r, c, 0) = base + gx * u + gy * v;
    }
  }
  const int shapes = 3 + static_cast<int>(rng() % 4);
  for (int s = 0; s < shapes; ++s) {
    const bool disc = rng.uniform() < 0.5;
    const double cx = rng.uniform(), cy = rng.uniform();
    const double size = 0.1 + 0.25 * rng.uniform();
    const double value = rng.uniform();
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double u = (c + 0.5) / w - cx, v = (r + 0.5) / h - cy;
        const bool inside = disc ? (u * u + v * v <= size * size)
                                 : (std::abs(u) <= size && std::abs(v) <= 0.6 * size);
        if (inside) img.at(r, c, 0) = value;
      }
    }
  }
  return clamp_unit(img);
}

namespace {

double parse_double(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(value)) {
    throw ParameterError("invalid number '" + s + "' in curve '" + context + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

Curve parse_curve(const std::string& text) {
  const std::size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "gamma" && !rest.empty()) {
    const double g = parse_double(rest, text);
    if (!(g > 0.0)) throw ParameterError("gamma exponent must be positive");
    return curves::Gamma{g};
  }
  if (name == "hdr_clip" && colon == std::string::npos) return curves::HdrClip{};
  if (name == "sigmoid") {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw ParameterError("sigmoid curve expects sigmoid:center:slope");
    const double slope = parse_double(parts[1], text);
    if (!(slope > 0.0)) throw ParameterError("sigmoid slope must be positive");
    return curves::Sigmoid{parse_double(parts[0], text), slope};
  }
  if (name == "piecewise" && !rest.empty()) {
    std::vector<std::pair<double, double>> knots;
    for (const std::string& knot : split(rest, ',')) {
      const auto xy = split(knot, ':');
      if (xy.size() != 2) throw ParameterError("piecewise knots are written x:y separated by commas");
      knots.emplace_back(parse_double(xy[0], text), parse_double(xy[1], text));
    }
    return curves::Piecewise(std::move(knots));
  }
  throw ParameterError("invalid curve '" + text +
                       "' (expected gamma:g, hdr_clip, sigmoid:c:s or piecewise:x:y,...)");
}

namespace {

using nlohmann::json;

json curve_to_json(const Curve& curve) {
  struct Visitor {
    json operator()(const curves::Gamma& g) const { return {{"type", "gamma"}, {"exponent", g.exponent}}; }
    json operator()(const curves::HdrClip&) const { return {{"type", "hdr_clip"}}; }
    json operator()(const curves::Sigmoid& s) const {
      return {{"type", "sigmoid"}, {"center", s.center}, {"slope", s.slope}};
    }
    json operator()(const curves::Piecewise& p) const {
      json knots = json::array();
      for (const auto& [x, y] : p.knots()) knots.push_back({x, y});
      return {{"type", "piecewise"}, {"knots", knots}};
    }
  };
  return std::visit(Visitor{}, curve);
}

Curve curve_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gamma") return curves::Gamma{j.at("exponent").get<double>()};
  if (type == "hdr_clip") return curves::HdrClip{};
  if (type == "sigmoid") return curves::Sigmoid{j.at("center").get<double>(), j.at("slope").get<double>()};
  if (type == "piecewise") {
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : j.at("knots")) {
      const auto xy = k.get<std::vector<double>>();
      if (xy.size() != 2) throw ParameterError("piecewise knot must be [x, y]");
      knots.emplace_back(xy[0], xy[1]);
    }
    return curves::Piecewise(std::move(knots));
  }
  throw ParameterError("unknown curve type '" + type + "'");
}

}  // namespace

std::string spec_to_json(const DegradeSpec& spec) {
  json j;
  j["curve"] = curve_to_json(spec.curve);
  j["sigma"] = spec.sigma;
  j["seed"] = spec.seed;
  return j.dump(2);
}

DegradeSpec spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DegradeSpec spec;
    spec.curve = curve_from_json(j.at("curve"));
    spec.sigma = j.value("sigma", kDefaultSigma);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (!(spec.sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed degrade spec JSON: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid degrade spec JSON: ") + e.what());
  }
}

}  // namespace camb
