#include "camb/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "camb/error.hpp"
#include "camb/rng.hpp"

namespace camb {

namespace {

// Symmetric reflection including the edge sample: ... c b a | a b c | c b a ...
std::size_t reflect(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

}  // namespace

const char* denoiser_name(DenoiserSpec::Kind kind) {
  switch (kind) {
    case DenoiserSpec::Kind::identity:
      return "identity";
    case DenoiserSpec::Kind::gaussian:
      return "gaussian";
    case DenoiserSpec::Kind::tv:
      return "tv";
  }
  return "unknown";
}

DenoiserSpec parse_denoiser(const std::string& name) {
  if (name == "identity") return DenoiserSpec::identity();
  if (name == "gaussian") return DenoiserSpec::gaussian();
  if (name == "tv") return DenoiserSpec::tv();
  throw ParameterError(std::string("unknown prior '") + name + "' (expected identity, gaussian or tv)");
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  if (!(sigma > 0.0) || radius == 0) return img;
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  ImageTensor rows(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 img.at(y, reflect(static_cast<long>(x) + k, w), ch);
        }
        rows.at(y, x, ch) = acc;
      }
    }
  }
  ImageTensor out(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 rows.at(reflect(static_cast<long>(y) + k, h), x, ch);
        }
        out.at(y, x, ch) = acc;
      }
    }
  }
  return out;
}

TvResult tv_denoise(const ImageTensor& noisy, double weight, const TvOptions& options) {
  if (!(weight > 0.0)) throw ParameterError("TV weight must be positive");
  const std::size_t h = noisy.height(), w = noisy.width(), c = noisy.channels();
  const std::size_t n = noisy.size();
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), term(n);
  TvResult result;
  const double tau = options.step;

  auto index = [&](std::size_t y, std::size_t x, std::size_t ch) { return (y * w + x) * c + ch; };
  auto compute_div = [&] {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t i = index(y, x, ch);
          double d = 0.0;
          if (x + 1 < w) d += px[i];
          if (x > 0) d -= px[index(y, x - 1, ch)];
          if (y + 1 < h) d += py[i];
          if (y > 0) d -= py[index(y - 1, x, ch)];
          div[i] = d;
        }
      }
    }
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) term[i] = div[i] - noisy[i] / weight;
    double change = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t i = index(y, x, ch);
          const double gx = x + 1 < w ? term[index(y, x + 1, ch)] - term[i] : 0.0;
          const double gy = y + 1 < h ? term[index(y + 1, x, ch)] - term[i] : 0.0;
          const double norm = std::sqrt(gx * gx + gy * gy);
          const double nx = (px[i] + tau * gx) / (1.0 + tau * norm);
          const double ny = (py[i] + tau * gy) / (1.0 + tau * norm);
          change = std::max({change, std::abs(nx - px[i]), std::abs(ny - py[i])});
          px[i] = nx;
          py[i] = ny;
        }
      }
    }
    compute_div();
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = noisy[i] - weight * div[i];
      energy += u * u;
    }
    result.dual_energy.push_back(energy);
    result.iterations = it + 1;
    if (change < options.tolerance) break;
  }

  result.image = noisy;
  for (std::size_t i = 0; i < n; ++i) result.image[i] = noisy[i] - weight * div[i];
  return result;
}

ImageTensor denoise(const DenoiserSpec& spec, const ImageTensor& noisy, double amplitude) {
  if (!(amplitude > 0.0 && amplitude < 1.0)) {
    throw ParameterError("denoiser amplitude must lie in (0,1), got " + std::to_string(amplitude));
  }
  if (!(spec.strength_scale > 0.0)) throw ParameterError("denoiser strength_scale must be positive");
  switch (spec.kind) {
    case DenoiserSpec::Kind::identity:
      return clamp_unit(noisy);
    case DenoiserSpec::Kind::gaussian:
      return clamp_unit(gaussian_blur(noisy, spec.strength_scale * amplitude));
    case DenoiserSpec::Kind::tv:
      return clamp_unit(tv_denoise(noisy, spec.strength_scale * amplitude).image);
  }
  return noisy;
}

ImageTensor add_noise(const ImageTensor& img, double amplitude, std::uint64_t seed) {
  if (amplitude == 0.0) return img;
  Pcg64 rng(seed, "noise");
  ImageTensor out = img;
  for (double& v : out.values()) v += amplitude * rng.gaussian();
  return out;
}

}  // namespace camb
