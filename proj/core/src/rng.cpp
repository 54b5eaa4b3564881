#include "fedzo/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedzo {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), state_(mix64(seed + kGolden)) {}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  // Non-caching Box-Muller keeps per-draw consumption fixed at two uniforms.
  double u1 = next_double();
  const double u2 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  return radius * std::cos(2.0 * std::numbers::pi * u2);
}

NumVec RngStream::gaussian_vector(std::size_t dim) {
  NumVec out(dim);
  for (double& v : out) v = next_gaussian();
  return out;
}

double RngStream::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  // Multiply-shift map of a full 64-bit draw onto [0, n). The modulo bias is
  // O(n / 2^64), irrelevant for the index ranges used here.
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

RngStream RngStream::substream(std::string_view label, std::uint64_t index) const {
  std::uint64_t child = mix64(seed_ ^ fnv1a(label));
  child = mix64(child + kGolden * (index + 1));
  return RngStream(child);
}

}  // namespace fedzo
