#pragma once

#include <array>
#include <cstdint>

namespace nmjump {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
// keyed by (master seed, stream id); outputs depend only on (key, counter),
// so trajectory k draws an identical sequence no matter which worker runs it
// or in which order.
class PhiloxStream {
public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream),
                 static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint32_t next_u32() {
    if (index_ == 4) {
      block_ = round10(counter_, key_);
      advance_counter();
      index_ = 0;
    }
    return block_[index_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // uniform double strictly inside (0, 1)
  double uniform() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  // one keyed block, exposed for known-answer tests
  static std::array<std::uint32_t, 4> round10(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      ctr = round_once(ctr, key);
    }
    return ctr;
  }

private:
  static std::array<std::uint32_t, 4> round_once(
      const std::array<std::uint32_t, 4>& ctr,
      const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  void advance_counter() {
    if (++counter_[0] == 0) ++counter_[1];  // 64-bit block index per stream
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
};

}  // namespace nmjump
