#pragma once

#include <cstdint>
#include <random>

namespace recon {

/// Recorded in every result file so that a run can be replayed.
inline constexpr const char* rng_algorithm = "mt19937_64/splitmix64-streams/box-muller v1";

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of an independent stream, derived from the master seed, the Monte Carlo
/// path index and a tag naming the consumer (noise, auxiliary field, resample).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t path, std::uint64_t tag);

// Tags for stream_seed.
inline constexpr std::uint64_t tag_noise = 1;
inline constexpr std::uint64_t tag_field = 2;
inline constexpr std::uint64_t tag_resample = 3;
inline constexpr std::uint64_t tag_family = 4;

// Uniform and normal variates are produced by hand rather than through
// std::normal_distribution, whose algorithm differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // (0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace recon
