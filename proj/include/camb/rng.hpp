#pragma once

#include <cstdint>
#include <string_view>

namespace camb {

// PCG64: 128-bit LCG state with the XSL-RR output function (O'Neill's
// pcg64 / pcg_setseq_128_xsl_rr_64). Seeding follows the reference
// pcg64_srandom_r: state = 0, inc = (stream << 1) | 1, step, state += seed, step.
// The 64-bit user seed and stream id are widened to 128 bits with splitmix64.
class Pcg64 {
 public:
  using result_type = std::uint64_t;

  explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0);
  // Named substream: stream id is the FNV-1a hash of the name.
  Pcg64(std::uint64_t seed, std::string_view stream_name);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform double in the open interval (0,1), 53 random bits.
  double uniform();

  // Standard normal via the Marsaglia polar method. The spare deviate of
  // each accepted pair is cached and returned by the next call.
  double gaussian();

 private:
  unsigned __int128 state_ = 0;
  unsigned __int128 inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;

  void step();
};

std::uint64_t splitmix64(std::uint64_t& x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace camb
