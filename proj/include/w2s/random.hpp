#pragma once

// Counter-based random numbers.
//
// Every random quantity in the lab is a pure function of a 64-bit stream key
// and an integer position, so a batch, a trial, or a single matrix entry can
// be regenerated in isolation and parallel schedules reproduce serial output.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace w2s::random {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Identifies one independent random stream.
struct StreamKey {
  std::uint64_t value = 0;

  friend constexpr bool operator==(StreamKey, StreamKey) = default;
};

/// Derives a child stream from a parent key and a list of integer tags.
///
/// The tag position is folded in, so (a, b) and (b, a) give different keys.
constexpr StreamKey derive(StreamKey parent, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(parent.value ^ 0x6a09e667f3bcc909ull);
  std::uint64_t position = 0;
  for (std::uint64_t tag : tags) {
    ++position;
    h = mix64(h ^ mix64(tag + position * 0x9e3779b97f4a7c15ull));
  }
  return StreamKey{h};
}

namespace detail {

constexpr Philox4x32::Key split_key(StreamKey key) noexcept {
  return {static_cast<std::uint32_t>(key.value), static_cast<std::uint32_t>(key.value >> 32)};
}

/// Two 64-bit words from one Philox block at position (a, b).
constexpr std::array<std::uint64_t, 2> block(StreamKey key, std::uint64_t a, std::uint64_t b) noexcept {
  const auto out = Philox4x32::apply(
      {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
       static_cast<std::uint32_t>(b >> 32)},
      split_key(key));
  return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
}

// (0, 1], never zero so log() is finite.
inline double open_unit(std::uint64_t word) noexcept {
  return static_cast<double>((word >> 11) + 1) * 0x1.0p-53;
}

}  // namespace detail

/// Uniform double in [0, 1).
inline double to_unit(std::uint64_t word) noexcept { return static_cast<double>(word >> 11) * 0x1.0p-53; }

/// Box-Muller pair generated from the block at (row, pair).
inline std::array<double, 2> normal_pair(StreamKey key, std::uint64_t row, std::uint64_t pair) noexcept {
  const auto words = detail::block(key, row, pair);
  const double radius = std::sqrt(-2.0 * std::log(detail::open_unit(words[0])));
  const double angle = 2.0 * std::numbers::pi * to_unit(words[1]);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Standard normal attached to matrix position (row, col) of a stream.
inline double normal_at(StreamKey key, std::uint64_t row, std::uint64_t col) noexcept {
  return normal_pair(key, row, col / 2)[col % 2];
}

/// Fills out[0..len) with the normals of columns [first, first+len) in `row`.
template <typename OutIt>
void fill_normal_row(StreamKey key, std::uint64_t row, std::uint64_t first, std::uint64_t len, OutIt out) {
  std::uint64_t col = first;
  const std::uint64_t end = first + len;
  if (col < end && col % 2 == 1) {
    *out++ = normal_pair(key, row, col / 2)[1];
    ++col;
  }
  for (; col + 1 < end; col += 2) {
    const auto z = normal_pair(key, row, col / 2);
    *out++ = z[0];
    *out++ = z[1];
  }
  if (col < end) *out++ = normal_pair(key, row, col / 2)[0];
}

/// Sequential view of a stream: a counter walking along row 0 of the key.
///
/// Satisfies UniformRandomBitGenerator, so it can drive std algorithms, but the
/// normal and uniform helpers here are what the lab uses for reproducibility
/// across standard libraries.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(StreamKey key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (word_index_ == 2) refill();
    return words_[word_index_++];
  }

  double uniform() noexcept { return to_unit((*this)()); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const auto z = normal_pair(key_, kNormalRow, normal_counter_++);
    spare_ = z[1];
    has_spare_ = true;
    return z[0];
  }

  StreamKey key() const noexcept { return key_; }

 private:
  static constexpr std::uint64_t kWordRow = 0;
  static constexpr std::uint64_t kNormalRow = 1;

  void refill() noexcept {
    words_ = detail::block(key_, kWordRow, word_counter_++);
    word_index_ = 0;
  }

  StreamKey key_;
  std::uint64_t word_counter_ = 0;
  std::uint64_t normal_counter_ = 0;
  std::array<std::uint64_t, 2> words_{};
  int word_index_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace w2s::random
