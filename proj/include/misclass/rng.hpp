#pragma once

#include <array>
#include <cstdint>

namespace misclass {

// SplitMix64 finalizer; used to derive keys for child streams.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Counter-based random stream (Philox4x32-10). The 64-bit seed is the key and
// the stream id occupies the upper half of the counter, so every
// (seed, stream_id) pair addresses its own non-overlapping sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform_open() noexcept;

  // Independent child stream. The child's key is derived from this stream's
  // identity, never from its position, so split() is reproducible.
  RandomStream split(std::uint64_t child) const noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned index_ = 4;
};

}  // namespace misclass
