#include "persim/rng.hpp"

#include <cmath>

namespace persim {
namespace {

constexpr double kPi = 3.14159265358979323846;

uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(uint64_t master_seed, std::string_view label)
    : master_seed_(master_seed), label_(label) {
  uint64_t x = master_seed;
  splitmix64(x);          // diffuse the master seed
  x ^= fnv1a64(label);    // fold in the stream label
  splitmix64(x);          // diffuse the combination
  for (auto& s : state_) s = splitmix64(x);
}

uint64_t RngStream::next_u64() {
  // xoshiro256++
  const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

double RngStream::normal() {
  // Box-Muller; u1 is shifted into (0,1] so the log never sees zero.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

int RngStream::uniform_int(int n) {
  // Multiply-high range reduction; bias is O(n / 2^64), far below anything
  // observable here, and the draw count stays fixed at one.
  return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                           static_cast<unsigned __int128>(n)) >>
                          64);
}

RngStream derive_stream(uint64_t master_seed, std::string_view label) {
  return RngStream(master_seed, label);
}

uint64_t derive_seed(uint64_t master_seed, std::string_view label) {
  return RngStream(master_seed, label).next_u64();
}

}  // namespace persim
