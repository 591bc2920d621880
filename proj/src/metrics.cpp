#include "camb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "camb/error.hpp"

namespace camb {

double mse(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / err);
}

namespace {

constexpr std::size_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  double total = 0.0;
  const double center = (kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// Valid-region separable filtering of one channel stored as rows x cols.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t out_cols = cols - n + 1, out_rows = rows - n + 1;
  std::vector<double> tmp(rows * out_cols);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < out_cols; ++x) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += k[j] * src[y * cols + x + j];
      tmp[y * out_cols + x] = acc;
    }
  }
  std::vector<double> out(out_rows * out_cols);
  for (std::size_t y = 0; y < out_rows; ++y) {
    for (std::size_t x = 0; x < out_cols; ++x) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += k[j] * tmp[(y + j) * out_cols + x];
      out[y * out_cols + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  if (std::min(a.height(), a.width()) < kSsimWindow) {
    throw ParameterError("ssim needs images of at least 11x11, got " + a.shape_string());
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const std::vector<double> k = ssim_kernel();
  const std::size_t h = a.height(), w = a.width(), ch = a.channels();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> pa(h * w), pb(h * w), paa(h * w), pbb(h * w), pab(h * w);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) {
      pa[i] = a[i * ch + c];
      pb[i] = b[i * ch + c];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto ma = filter_valid(pa, h, w, k), mb = filter_valid(pb, h, w, k);
    const auto eaa = filter_valid(paa, h, w, k), ebb = filter_valid(pbb, h, w, k);
    const auto eab = filter_valid(pab, h, w, k);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = eaa[i] - ma[i] * ma[i];
      const double vb = ebb[i] - mb[i] * mb[i];
      const double cov = eab[i] - ma[i] * mb[i];
      const double num = (2.0 * (ma[i] * mb[i]) + c1) * (2.0 * cov + c2);
      const double den = (ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2);
      total += num / den;
    }
    count += ma.size();
  }
  return total / static_cast<double>(count);
}

ImageTensor lightness(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), 1);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    double m = img[p * img.channels()];
    for (std::size_t c = 1; c < img.channels(); ++c) m = std::max(m, img[p * img.channels() + c]);
    out[p] = m;
  }
  return out;
}

namespace {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::size_t reflect_index(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

struct Taps {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

// Resampling taps for each output sample along one axis.
std::vector<Taps> axis_taps(std::size_t in_size, std::size_t out_size, std::size_t factor, bool antialias) {
  std::vector<Taps> taps(out_size);
  const double f = static_cast<double>(factor);
  for (std::size_t o = 0; o < out_size; ++o) {
    Taps& t = taps[o];
    if (!antialias) {
      // Sample at the integer position nearest the block center.
      const double pos = std::floor((static_cast<double>(o) + 0.5) * f - 0.5 + 0.5);
      for (long k = -1; k <= 2; ++k) {
        const long i = static_cast<long>(pos) + k;
        t.index.push_back(reflect_index(i, in_size));
        t.weight.push_back(catmull_rom(static_cast<double>(k)));
      }
      continue;
    }
    const double center = (static_cast<double>(o) + 0.5) * f - 0.5;
    const long lo = static_cast<long>(std::floor(center - 2.0 * f));
    const long hi = static_cast<long>(std::ceil(center + 2.0 * f));
    double total = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double w = catmull_rom((static_cast<double>(i) - center) / f);
      if (w == 0.0) continue;
      t.index.push_back(reflect_index(i, in_size));
      t.weight.push_back(w);
      total += w;
    }
    for (double& w : t.weight) w /= total;
  }
  return taps;
}

}  // namespace

ImageTensor bicubic_downsample(const ImageTensor& img, std::size_t factor, bool antialias) {
  if (factor == 0) throw ParameterError("downsample factor must be positive");
  if (factor == 1) return img;
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  const std::size_t oh = std::max<std::size_t>(1, h / factor), ow = std::max<std::size_t>(1, w / factor);
  const auto row_taps = axis_taps(h, oh, factor, antialias);
  const auto col_taps = axis_taps(w, ow, factor, antialias);
  ImageTensor horizontal(h, ow, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t t = 0; t < col_taps[x].index.size(); ++t) {
          acc += col_taps[x].weight[t] * img.at(y, col_taps[x].index[t], ch);
        }
        horizontal.at(y, x, ch) = acc;
      }
    }
  }
  ImageTensor out(oh, ow, c);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t t = 0; t < row_taps[y].index.size(); ++t) {
          acc += row_taps[y].weight[t] * horizontal.at(row_taps[y].index[t], x, ch);
        }
        out.at(y, x, ch) = acc;
      }
    }
  }
  return out;
}

double loe_from_lightness(std::span<const double> l, std::span<const double> r) {
  if (l.size() != r.size()) throw ParameterError("loe: lightness maps differ in size");
  const std::size_t m = l.size();
  if (m == 0) return 0.0;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      mismatches += static_cast<std::size_t>((l[i] >= l[j]) != (r[i] >= r[j]));
    }
  }
  return static_cast<double>(mismatches) / static_cast<double>(m);
}

double loe(const ImageTensor& enhanced, const ImageTensor& reference, const LoeOptions& options) {
  require_same_shape(enhanced, reference, "loe");
  const ImageTensor l = bicubic_downsample(lightness(enhanced), options.downsample, options.antialias);
  const ImageTensor r = bicubic_downsample(lightness(reference), options.downsample, options.antialias);
  return loe_from_lightness(l.values(), r.values());
}

double fidelity_error(const ImageTensor& y, const Operator& op, const ImageTensor& x) {
  require_same_shape(y, x, "fidelity_error");
  return mse(y, forward(op, x));
}

}  // namespace camb
