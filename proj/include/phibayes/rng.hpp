#pragma once

#include <cstdint>
#include <random>

namespace phibayes {

// Deterministic stream RNG with hierarchical splitting.
//
// A stream is identified by a 64-bit root value. child(tag) derives a new,
// statistically independent stream from (root, tag) by hashing, so the draws
// of e.g. replication r depend only on (master_seed, r) and never on how many
// other streams were consumed before it.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream child(std::uint64_t tag) const;

  std::uint64_t next_u64();
  // Uniform strictly inside (0, 1); never returns an endpoint.
  double uniform();
  // Standard normal via Box-Muller (one spare cached).
  double normal();
  double exponential(double rate);

  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64-style avalanche mix of two words, used for stream derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace phibayes
