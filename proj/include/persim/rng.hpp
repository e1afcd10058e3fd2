#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace persim {

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
//
// Stream splitting: a stream is identified by (master_seed, label). The label
// is hashed with FNV-1a and folded into the splitmix64 seeding path, so
// distinct labels give unrelated streams and the same pair always reproduces
// the same draw sequence. Everything is plain 64-bit integer arithmetic, so
// sequences are identical across platforms and compilers.
//
// Draw conventions (frozen, other code depends on the draw counts):
//   next_unit()   one u64 draw, uniform on [0,1) with 53-bit resolution
//   uniform(a,b)  one u64 draw
//   normal()      two u64 draws (Box-Muller, no cached spare)
//   uniform_int(n) one u64 draw (multiply-high range reduction)
class RngStream {
 public:
  RngStream() : RngStream(0, "") {}
  RngStream(uint64_t master_seed, std::string_view label);

  uint64_t next_u64();
  double next_unit();
  double uniform(double lo, double hi);
  double normal();
  int uniform_int(int n);

  uint64_t master_seed() const { return master_seed_; }
  const std::string& label() const { return label_; }

 private:
  std::array<uint64_t, 4> state_{};
  uint64_t master_seed_ = 0;
  std::string label_;
};

// Convenience spelling used throughout: a stream for (master_seed, label).
RngStream derive_stream(uint64_t master_seed, std::string_view label);

// A 64-bit sub-seed derived from (master_seed, label); used where a component
// wants its own seed (e.g. per-repetition environment seeds).
uint64_t derive_seed(uint64_t master_seed, std::string_view label);

}  // namespace persim
