#include "pxmc/rng.hpp"

#include <cmath>
#include <numbers>

namespace pxmc {

namespace {

constexpr std::uint64_t kPhiloxM = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kPhiloxW = 0x9E3779B97F4A7C15ULL;

double to_open_unit(std::uint64_t w) {
  return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

// splitmix64 finalizer, used only to derive child keys
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::Block philox2x64(RngStream::Block ctr, std::uint64_t key) {
  for (int round = 0; round < 10; ++round) {
    const unsigned __int128 product = static_cast<unsigned __int128>(kPhiloxM) * ctr[0];
    const auto hi = static_cast<std::uint64_t>(product >> 64);
    const auto lo = static_cast<std::uint64_t>(product);
    ctr = {hi ^ key ^ ctr[1], lo};
    key += kPhiloxW;
  }
  return ctr;
}

RngStream::Block RngStream::next_block() {
  const Block out = philox2x64({counter_lo_, counter_hi_}, key_);
  if (++counter_lo_ == 0) ++counter_hi_;
  return out;
}

double RngStream::uniform() { return to_open_unit(next_block()[0]); }

std::uint64_t RngStream::index(std::uint64_t n) {
  const unsigned __int128 product = static_cast<unsigned __int128>(next_block()[0]) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

void RngStream::fill_normal(double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2) {
    const Block b = next_block();
    const double radius = std::sqrt(-2.0 * std::log(to_open_unit(b[0])));
    const double angle = 2.0 * std::numbers::pi * to_open_unit(b[1]);
    out[i] = radius * std::cos(angle);
    if (i + 1 < n) out[i + 1] = radius * std::sin(angle);
  }
}

double RngStream::normal() {
  double z;
  fill_normal(&z, 1);
  return z;
}

RngStream RngStream::split(std::uint64_t stream_id) const {
  return RngStream(mix64(key_ ^ mix64(stream_id + 1)));
}

}  // namespace pxmc
