#pragma once

#include <array>
#include <cstdint>

namespace pxmc {

// Counter-based Philox-2x64-10 stream.
//
// The 64-bit seed is the Philox key and the 128-bit state is the block
// counter. Every draw consumes whole blocks of two 64-bit words:
//
//   uniform()  one block, word 0:  ((w0 >> 11) + 0.5) * 2^-53, in (0, 1)
//   index(n)   one block, word 0:  (w0 * n) >> 64
//   normals    one block per pair: u1, u2 from words 0 and 1 as above,
//              z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = sqrt(-2 ln u1) sin(2 pi u2);
//              a fill of n values uses ceil(n / 2) blocks and drops the last
//              z1 when n is odd.
//
// Replaying the same seed and draw sequence reproduces every value bit for bit.
class RngStream {
 public:
  using Block = std::array<std::uint64_t, 2>;

  explicit RngStream(std::uint64_t seed = 0) : key_(seed) {}

  Block next_block();

  double uniform();
  std::uint64_t index(std::uint64_t n);
  /// Fills `out[0..n)` with standard normals.
  void fill_normal(double* out, std::size_t n);
  double normal();

  std::uint64_t seed() const { return key_; }
  /// Number of blocks consumed so far.
  std::uint64_t draw_count() const { return counter_lo_; }
  std::array<std::uint64_t, 2> counter() const { return {counter_lo_, counter_hi_}; }

  /// Derives an independent stream (different key) for a sub-task.
  RngStream split(std::uint64_t stream_id) const;

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_lo_ = 0;
  std::uint64_t counter_hi_ = 0;
};

/// Philox-2x64 with 10 rounds applied to one counter block.
RngStream::Block philox2x64(RngStream::Block counter, std::uint64_t key);

}  // namespace pxmc
