#pragma once

#include <cstdint>
#include <vector>

namespace stabposi {

/// Path-keyed counter-based random stream.
///
/// The key is a SplitMix64 hash of (master_seed, path); the i-th draw is
/// SplitMix64(key + i * golden). A child stream extends the path, so the draws a
/// task sees depend only on where it sits in the (trial, step, candidate) tree,
/// never on which thread runs it or in what order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path = {});

  std::uint64_t master_seed() const { return master_seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  RngStream child(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Uniform on the open interval (-1/2, 1/2).
  double uniform_centered() { return uniform() - 0.5; }
  /// Box-Muller, two uniforms per draw (no cached second value).
  double standard_normal();

 private:
  std::uint64_t master_seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace stabposi
