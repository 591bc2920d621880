#include "camb/rng.hpp"

#include <cmath>

namespace camb {

namespace {

using u128 = unsigned __int128;

constexpr u128 kMultiplier = (u128{2549297995355413924ULL} << 64) | u128{4865540595714422341ULL};

u128 widen(std::uint64_t value) {
  std::uint64_t x = value;
  const std::uint64_t hi = splitmix64(x);
  const std::uint64_t lo = splitmix64(x);
  return (u128{hi} << 64) | u128{lo};
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Pcg64::Pcg64(std::uint64_t seed, std::uint64_t stream) {
  state_ = 0;
  inc_ = (widen(stream) << 1) | 1u;
  step();
  state_ += widen(seed);
  step();
}

Pcg64::Pcg64(std::uint64_t seed, std::string_view stream_name) : Pcg64(seed, fnv1a64(stream_name)) {}

void Pcg64::step() { state_ = state_ * kMultiplier + inc_; }

Pcg64::result_type Pcg64::operator()() {
  step();
  const auto hi = static_cast<std::uint64_t>(state_ >> 64);
  const auto lo = static_cast<std::uint64_t>(state_);
  const std::uint64_t x = hi ^ lo;
  const unsigned rot = static_cast<unsigned>(state_ >> 122);
  return (x >> rot) | (x << ((64u - rot) & 63u));
}

double Pcg64::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double Pcg64::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

}  // namespace camb
