#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "camb/camb.hpp"
#include "camb/degrade.hpp"
#include "camb/error.hpp"
#include "camb/metrics.hpp"
#include "camb/priors.hpp"
#include "camb/rng.hpp"
#include "support.hpp"

using namespace camb;

namespace {

// Windowed SSIM evaluated directly with a 2-D Gaussian window.
double ref_ssim(const ImageTensor& a, const ImageTensor& b) {
  const int r = 5;
  std::vector<double> w2;
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      w2.push_back(std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5)));
      total += w2.back();
    }
  }
  for (double& v : w2) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    for (std::size_t y = r; y + r < a.height(); ++y) {
      for (std::size_t x = r; x + r < a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        std::size_t k = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx, ++k) {
            const double va = a.at(y + dy, x + dx, c), vb = b.at(y + dy, x + dx, c);
            ma += w2[k] * va;
            mb += w2[k] * vb;
            saa += w2[k] * va * va;
            sbb += w2[k] * vb * vb;
            sab += w2[k] * va * vb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

// Pair enumeration straight from the definition.
double ref_loe(const std::vector<double>& l, const std::vector<double>& r) {
  double count = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    for (std::size_t j = 0; j < l.size(); ++j) {
      const bool u = l[i] >= l[j];
      const bool v = r[i] >= r[j];
      count += (u != v) ? 1.0 : 0.0;
    }
  }
  return count / static_cast<double>(l.size());
}

}  // namespace

TEST_CASE("psnr") {
  const ImageTensor a(8, 8, 1, 0.2), b(8, 8, 1, 0.3);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(psnr(ImageTensor(3, 3, 3, 0.0), ImageTensor(3, 3, 3, 1.0)) == 0.0);
  CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(a, ImageTensor(8, 7, 1)), ParameterError);
}

TEST_CASE("psnr falls as noise grows") {
  const ImageTensor x = make_scene(2, 48, 48);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 10; ++i) {
    const double p = psnr(add_noise(x, 0.01 * i, 5), x);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim") {
  Pcg64 rng(61, "ssim");
  const ImageTensor a = testing::random_image(rng, 24, 20, 3);
  CHECK(ssim(a, a) == 1.0);
  const ImageTensor scene = make_scene(4, 32, 32);
  CHECK(ssim(scene, scene) == 1.0);
  ImageTensor inv = scene;
  for (double& v : inv.values()) v = 1.0 - v;
  CHECK(ssim(scene, inv) < 0.5);
  const ImageTensor flat(16, 16, 1, 0.4), flat_eps(16, 16, 1, 0.4 + 1e-6);
  CHECK(ssim(flat, flat_eps) > 0.9999);
  const ImageTensor b = add_noise(a, 0.1, 3);
  CHECK(ssim(a, b) == doctest::Approx(ref_ssim(a, b)).epsilon(1e-12));
  CHECK(ssim(scene, inv) == doctest::Approx(ref_ssim(scene, inv)).epsilon(1e-12));
  const double s = ssim(a, b);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
  CHECK_THROWS_AS(ssim(ImageTensor(10, 30, 1), ImageTensor(10, 30, 1)), ParameterError);
}

TEST_CASE("loe brute force toys") {
  Pcg64 rng(62, "loe-toy");
  for (std::size_t side : {2, 3, 4}) {
    for (int trial = 0; trial < 50; ++trial) {
      ImageTensor a(side, side, 1), b(side, side, 1);
      for (std::size_t i = 0; i < a.size(); ++i) {
        // Coarse values so that ties occur.
        a[i] = std::floor(rng.uniform() * 4) / 4;
        b[i] = std::floor(rng.uniform() * 4) / 4;
      }
      const double expect = ref_loe(a.data(), b.data());
      CHECK(loe(a, b, LoeOptions{1, false}) == expect);
      CHECK(loe_from_lightness(a.values(), b.values()) == expect);
    }
  }
  // Reversal of four distinct values flips every off-diagonal pair.
  const std::vector<double> l = {0.1, 0.4, 0.2, 0.9};
  std::vector<double> r;
  for (double v : l) r.push_back(1.0 - v);
  CHECK(loe_from_lightness(l, r) == 3.0);
  CHECK(ref_loe(l, r) == 3.0);
}

TEST_CASE("loe properties") {
  Pcg64 rng(63, "loe");
  const ImageTensor a = testing::random_image(rng, 32, 32, 3);
  const ImageTensor b = testing::random_image(rng, 32, 32, 3);
  CHECK(loe(a, a) == 0.0);
  CHECK(loe(a, b) == loe(b, a));
  CHECK(loe(a, b, LoeOptions{4, true}) == loe(b, a, LoeOptions{4, true}));
  ImageTensor g = a;
  for (double& v : g.values()) v = std::sqrt(v);
  CHECK(loe(g, a) == 0.0);
  ImageTensor inv(16, 16, 1);
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = (static_cast<double>(i) + 0.5) / 256.0;
  ImageTensor flipped = inv;
  for (double& v : flipped.values()) v = 1.0 - v;
  // 4x4 distinct samples after downsampling: M - 1 = 15.
  CHECK(loe(inv, flipped) == 15.0);
  CHECK_THROWS_AS(loe(a, ImageTensor(32, 31, 3)), ParameterError);
}

TEST_CASE("lightness and downsampling") {
  ImageTensor rgb(1, 2, 3, std::vector<double>{0.1, 0.7, 0.3, 0.9, 0.2, 0.4});
  const ImageTensor l = lightness(rgb);
  CHECK(l[0] == 0.7);
  CHECK(l[1] == 0.9);

  Pcg64 rng(64, "down");
  const ImageTensor img = testing::random_image(rng, 18, 23);
  const ImageTensor d = bicubic_downsample(img, 4, false);
  REQUIRE(d.height() == 4);
  REQUIRE(d.width() == 5);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 5; ++x) CHECK(d.at(y, x) == img.at(4 * y + 2, 4 * x + 2));
  }
  CHECK(bicubic_downsample(img, 1, true) == img);
  CHECK(bicubic_downsample(ImageTensor(3, 2, 1), 4, false).height() == 1);

  const ImageTensor flat(20, 20, 1, 0.3);
  const ImageTensor flat_down = bicubic_downsample(flat, 4, true);
  for (double v : flat_down.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
  ImageTensor ramp(32, 32, 1);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) ramp.at(y, x) = 0.01 * static_cast<double>(x) + 0.02 * static_cast<double>(y);
  }
  const ImageTensor rd = bicubic_downsample(ramp, 4, true);
  // Interior samples of a linear ramp land on the ramp at the block centre.
  for (std::size_t y = 2; y < 6; ++y) {
    for (std::size_t x = 2; x < 6; ++x) {
      CHECK(rd.at(y, x) == doctest::Approx(0.01 * (4.0 * x + 1.5) + 0.02 * (4.0 * y + 1.5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("fidelity error") {
  Pcg64 rng(65, "fid");
  const Operator op = testing::random_camb(rng, 3, 4);
  const ImageTensor x = testing::random_image(rng, 12, 12);
  const ImageTensor y = forward(op, x);
  CHECK(fidelity_error(y, op, x) == 0.0);
  ImageTensor shifted = x;
  for (double& v : shifted.values()) v = std::min(1.0, v + 0.1);
  const ImageTensor base(6, 6, 1, 0.5);
  CHECK(fidelity_error(ImageTensor(6, 6, 1, 0.6), Operator{AffineOperator{}}, base) == doctest::Approx(0.01).epsilon(1e-12));
  const ImageTensor noisy = add_noise(y, 0.05, 2);
  const ImageTensor again = forward(op, x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (noisy[i] - again[i]) * (noisy[i] - again[i]);
  CHECK(fidelity_error(noisy, op, x) == s / static_cast<double>(x.size()));
  CHECK_THROWS_AS(fidelity_error(y, op, ImageTensor(12, 11, 1)), ParameterError);
}
