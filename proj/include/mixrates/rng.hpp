#pragma once

#include <array>
#include <cstdint>

namespace mixrates {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The 64-bit seed is the key; the counter is (block index, stream). Every
/// output is a pure function of (seed, stream, position), so streams are
/// bit-identical across platforms and compilers.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block bijection(Block counter, Key key) noexcept;
};

/// Seeded random stream built on Philox4x32-10.
///
/// Uniforms use 53 random bits mapped to the open interval (0, 1). Gaussians
/// are drawn by inversion through the standard normal quantile, one uniform
/// per normal.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint32_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via inverse CDF.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Block buffer_{};
  int used_ = 4;
};

}  // namespace mixrates
