#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "mgpo/matrix.hpp"

namespace mgpo {

// xoshiro256** seeded through splitmix64. Fixed algorithm so that a seed
// produces the same stream on every platform; std::mt19937 distributions
// are not portable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  double uniform();         // [0, 1)
  double normal();          // standard Gaussian, Box-Muller
  std::uint64_t seed() const { return seed_; }

  // Derive an independent stream, e.g. one per epoch or worker.
  Rng split(std::uint64_t stream_id) const;

  std::array<std::uint64_t, 4> state() const { return state_; }
  bool has_spare() const { return has_spare_; }
  double spare() const { return spare_; }
  void restore(const std::array<std::uint64_t, 4>& s, bool has_spare, double spare);

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Matrix normal_fill(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std);

// Gaussian sample over the given shapes, normalized to unit global L2-norm.
std::vector<Matrix> unit_gaussian_direction(Rng& rng,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& shapes);

}  // namespace mgpo
