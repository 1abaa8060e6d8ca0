#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace foldmix {

// Philox4x32-10 counter-based generator. Output is a pure function of
// (key, counter), so streams are reproducible across platforms and threads.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

// 64-bit finalizer from splitmix64.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of s.
std::uint64_t fnv1a64(std::string_view s);

// Seed for replicate r of experiment `experiment` at sample size n.
std::uint64_t derive_seed(std::uint64_t master, std::string_view experiment,
                          std::uint64_t n, std::uint64_t replicate);

// Sequential view over a Philox stream keyed by `seed`: uniforms in (0,1)
// and standard normals by Box-Muller.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform();
  double normal();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next_u64();

 private:
  void refill();

  Philox4x32::Key key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter buffer_{};
  int pos_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace foldmix
