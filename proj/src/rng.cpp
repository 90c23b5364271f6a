#include "mgpo/rng.hpp"

#include <cmath>
#include <numbers>

namespace mgpo {

static std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 shifted into (0,1] so log() stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream_id) const {
  std::uint64_t mix = seed_ ^ (0x5851f42d4c957f2dULL * (stream_id + 1));
  return Rng(mix);
}

void Rng::restore(const std::array<std::uint64_t, 4>& s, bool has_spare, double spare) {
  state_ = s;
  has_spare_ = has_spare;
  spare_ = spare;
}

Matrix normal_fill(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std) {
  if (std < 0.0) throw UsageError("normal_fill: negative std");
  Matrix m(rows, cols);
  for (double& x : m.data) x = mean + std * rng.normal();
  return m;
}

std::vector<Matrix> unit_gaussian_direction(
    Rng& rng, const std::vector<std::pair<std::size_t, std::size_t>>& shapes) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<Matrix> dir;
    dir.reserve(shapes.size());
    for (auto [r, c] : shapes) dir.push_back(normal_fill(rng, r, c, 0.0, 1.0));
    const double norm = global_l2_norm(dir);
    if (norm > 0.0) {
      for (Matrix& m : dir)
        for (double& x : m.data) x /= norm;
      return dir;
    }
  }
  throw NumericError("unit_gaussian_direction: zero draw twice");
}

}  // namespace mgpo
