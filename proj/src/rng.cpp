#include "hsde/rng.hpp"

#include "hsde/core.hpp"

#include <cmath>
#include <numbers>

namespace hsde {

std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t index, StreamPurpose purpose) {
  std::uint64_t k = mix64(master_seed + 0x9E3779B97F4A7C15ULL);
  k = mix64(k ^ (index * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
  return mix64(k ^ (static_cast<std::uint64_t>(purpose) * 0x8CB92BA72F3D8DD7ULL));
}

std::uint64_t CounterRng::bits_at(std::uint64_t key, std::uint64_t counter) {
  // Two rounds: the first decorrelates neighbouring counters, the second the key.
  return mix64(mix64(counter * 0x9E3779B97F4A7C15ULL + key) ^ key);
}

double CounterRng::uniform_at(std::uint64_t key, std::uint64_t counter) {
  // 53 random bits, shifted by half an ulp so 0 is never returned.
  return (static_cast<double>(bits_at(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal_at(std::uint64_t key, std::uint64_t index) {
  const double u1 = uniform_at(key, 2 * index);
  const double u2 = uniform_at(key, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::exponential(double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("exponential rate must be > 0");
  return -std::log(uniform()) / rate;
}

}  // namespace hsde
