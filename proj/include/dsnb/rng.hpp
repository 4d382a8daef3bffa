#pragma once

#include <cstdint>
#include <random>

namespace dsnb {

// A seeded random stream. Two streams built from the same (seed, stream_id)
// produce identical sequences; sub-streams obtained through derive() are
// keyed deterministically so parallel work can be merged reproducibly.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream keyed by (this stream, key). Does not advance this stream.
  RngStream derive(std::uint64_t key) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();

  engine_type& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dsnb
