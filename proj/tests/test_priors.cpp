#include <doctest.h>

#include <cmath>
#include <vector>

#include "camb/degrade.hpp"
#include "camb/error.hpp"
#include "camb/priors.hpp"
#include "camb/rng.hpp"
#include "support.hpp"

using namespace camb;

namespace {

// Direct 2-D convolution with a symmetric (edge-repeating) mirror.
ImageTensor ref_blur(const ImageTensor& img, double sigma) {
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k;
  double total = 0.0;
  for (long i = -r; i <= r; ++i) {
    k.push_back(std::exp(-0.5 * i * i / (sigma * sigma)));
    total += k.back();
  }
  for (double& v : k) v /= total;
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  ImageTensor out(img.height(), img.width(), img.channels());
  const long h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (long dy = -r; dy <= r; ++dy) {
          for (long dx = -r; dx <= r; ++dx) {
            acc += k[static_cast<std::size_t>(dy + r)] * k[static_cast<std::size_t>(dx + r)] *
                   img.at(mirror(y + dy, h), mirror(x + dx, w), c);
          }
        }
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
    }
  }
  return out;
}

double tv_objective(const ImageTensor& u, const ImageTensor& f, double weight) {
  double fit = 0.0, tv = 0.0;
  const std::size_t h = u.height(), w = u.width();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double d = u.at(y, x) - f.at(y, x);
      fit += 0.5 * d * d;
      const double gx = x + 1 < w ? u.at(y, x + 1) - u.at(y, x) : 0.0;
      const double gy = y + 1 < h ? u.at(y + 1, x) - u.at(y, x) : 0.0;
      tv += std::sqrt(gx * gx + gy * gy);
    }
  }
  return fit + weight * tv;
}

}  // namespace

TEST_CASE("identity denoiser clamps") {
  ImageTensor img(1, 3, 1, std::vector<double>{-0.2, 0.4, 1.7});
  const ImageTensor out = denoise(DenoiserSpec::identity(), img, 0.5);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.4);
  CHECK(out[2] == 1.0);
}

TEST_CASE("constants are fixed points") {
  const ImageTensor flat(12, 9, 3, 0.42);
  for (const DenoiserSpec& spec : {DenoiserSpec::identity(), DenoiserSpec::gaussian(), DenoiserSpec::tv()}) {
    for (double amp : {0.01, 0.5, 0.99}) {
      const ImageTensor out = denoise(spec, flat, amp);
      for (double v : out.values()) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian blur matches direct convolution") {
  Pcg64 rng(41, "blur");
  const ImageTensor img = testing::random_image(rng, 9, 14, 3);
  for (double sigma : {0.4, 1.0, 2.5, 6.0}) {
    const ImageTensor a = gaussian_blur(img, sigma);
    const ImageTensor b = ref_blur(img, sigma);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-13);
  }
  const ImageTensor denoised = denoise(DenoiserSpec::gaussian(4.0), img, 0.5);
  const ImageTensor direct = clamp_unit(ref_blur(img, 2.0));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(denoised[i] - direct[i]) < 1e-13);
}

TEST_CASE("tv small weight limit") {
  Pcg64 rng(42, "tv-limit");
  const ImageTensor img = testing::random_image(rng, 16, 16);
  const ImageTensor out = denoise(DenoiserSpec::tv(), img, 1e-6);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(out[i] - img[i]) <= 1e-4);
}

TEST_CASE("tv dual energy and optimality") {
  const ImageTensor scene = make_scene(5, 32, 32);
  const ImageTensor noisy = add_noise(scene, 0.1, 3);
  const double weight = 0.1;
  const TvResult r = tv_denoise(noisy, weight);
  REQUIRE(r.dual_energy.size() == static_cast<std::size_t>(r.iterations));
  CHECK(r.iterations <= 200);
  for (std::size_t i = 1; i < r.dual_energy.size(); ++i) CHECK(r.dual_energy[i] <= r.dual_energy[i - 1] * (1 + 1e-12));
  const double best = tv_objective(r.image, noisy, weight);
  CHECK(best < tv_objective(noisy, noisy, weight));
  CHECK(best < tv_objective(scene, noisy, weight));
  Pcg64 rng(43, "tv-perturb");
  int worse = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ImageTensor p = r.image;
    for (double& v : p.values()) v += 0.01 * rng.gaussian();
    if (tv_objective(p, noisy, weight) > best) ++worse;
  }
  CHECK(worse == 20);
  // Denoising brings the estimate closer to the clean scene.
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    before += (noisy[i] - scene[i]) * (noisy[i] - scene[i]);
    after += (r.image[i] - scene[i]) * (r.image[i] - scene[i]);
  }
  CHECK(after < 0.5 * before);
}

TEST_CASE("add_noise") {
  const ImageTensor zero(256, 256, 1, 0.0);
  CHECK(add_noise(zero, 0.0, 5) == zero);
  const ImageTensor a = add_noise(zero, 0.05, 9);
  const ImageTensor b = add_noise(zero, 0.05, 9);
  CHECK(a == b);
  CHECK(!(a == add_noise(zero, 0.05, 10)));
  double mean = 0.0;
  for (double v : a.values()) mean += v;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double v : a.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size() - 1));
  CHECK(sd >= 0.0495);
  CHECK(sd <= 0.0505);
  // Not clamped.
  bool negative = false;
  for (double v : a.values()) negative = negative || v < 0.0;
  CHECK(negative);
}

TEST_CASE("denoiser parameters") {
  const ImageTensor img(4, 4, 1, 0.3);
  for (double bad : {0.0, 1.0, -0.1, 1.5}) CHECK_THROWS_AS(denoise(DenoiserSpec::tv(), img, bad), ParameterError);
  CHECK_THROWS_AS(denoise(DenoiserSpec::tv(0.0), img, 0.5), ParameterError);
  CHECK(parse_denoiser("tv").kind == DenoiserSpec::Kind::tv);
  CHECK(parse_denoiser("gaussian").strength_scale == 4.0);
  CHECK(parse_denoiser("tv").strength_scale == 0.25);
  CHECK_THROWS_AS(parse_denoiser("bm3d"), ParameterError);
  Pcg64 rng(44, "det");
  const ImageTensor noisy = testing::random_image(rng, 10, 10);
  CHECK(denoise(DenoiserSpec::tv(), noisy, 0.3) == denoise(DenoiserSpec::tv(), noisy, 0.3));
}
