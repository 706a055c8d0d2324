#pragma once

#include <cstdint>

namespace hsde {

/// Purpose tag separating the independent substreams of one path.
enum class StreamPurpose : std::uint64_t {
  brownian = 1,
  markov = 2,
  probe = 3,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Key of the substream (master_seed, index, purpose).
std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t index, StreamPurpose purpose);

/// Counter-based generator: draw k of a stream is a pure function of
/// (key, k), so any position can be reached without replaying the stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t bits_at(std::uint64_t key, std::uint64_t counter);
  /// Uniform on the open interval (0, 1).
  static double uniform_at(std::uint64_t key, std::uint64_t counter);
  /// Standard normal (Box-Muller on draws 2k and 2k+1).
  static double normal_at(std::uint64_t key, std::uint64_t index);

  std::uint64_t next_bits() { return bits_at(key_, counter_++); }
  double uniform() { return uniform_at(key_, counter_++); }
  double normal() { return normal_at(key_, counter_++); }
  /// Exponential with the given rate; throws InvalidArgument unless rate > 0.
  double exponential(double rate);

  // UniformRandomBitGenerator interface, for std:: distributions.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_bits(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace hsde
