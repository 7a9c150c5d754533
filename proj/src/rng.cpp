#include "stabposi/rng.hpp"

#include <cmath>
#include <numbers>

namespace stabposi {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
    : master_seed_(master_seed), path_(std::move(path)) {
  key_ = splitmix64_mix(master_seed_ + kGolden);
  for (std::uint64_t p : path_) key_ = splitmix64_mix(key_ ^ splitmix64_mix(p + kGolden));
}

RngStream RngStream::child(std::uint64_t index) const {
  auto path = path_;
  path.push_back(index);
  return RngStream(master_seed_, std::move(path));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return splitmix64_mix(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  // (m + 1/2) 2^-53 with m in [0, 2^53) never hits 0 or 1.
  const auto m = next_u64() >> 11;
  return (static_cast<double>(m) + 0.5) * 0x1.0p-53;
}

double RngStream::standard_normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace stabposi
