#pragma once

// Multi-resolution Brownian driver. All resolutions consume the same fine
// grid: a coarse increment is the ordered sum of the fine increments it
// contains, so runs at different resolutions are coupled exactly (bit for
// bit) and a fixed (seed, path_id) reproduces the same noise regardless of
// how many paths exist or which worker draws it.

#include <nsfde/common.hpp>
#include <nsfde/rng.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace nsfde {

class BrownianDriver {
 public:
  BrownianDriver(std::uint64_t seed, std::uint64_t path_id, std::size_t m,
                 std::uint64_t n_fine)
      : stream_(seed, path_id),
        m_(m),
        n_fine_(n_fine),
        sqrt_h_(std::sqrt(1.0 / static_cast<double>(n_fine))) {
    if (m == 0 || n_fine == 0)
      throw ConfigError("brownian driver: m and n_fine must be positive");
  }

  std::size_t dim() const { return m_; }
  std::uint64_t n_fine() const { return n_fine_; }

  /// Increment over [j/n, (j+1)/n]; n must divide the fine grid.
  void increment(std::uint64_t n, std::uint64_t j, Vec& out) {
    if (n == 0 || n_fine_ % n != 0)
      throw ResolutionMismatch(
          "brownian driver: resolution does not divide the fine grid");
    const std::uint64_t q = n_fine_ / n;
    ensure((j + 1) * q);
    out.assign(m_, 0.0);
    for (std::uint64_t i = j * q; i < (j + 1) * q; ++i)
      for (std::size_t c = 0; c < m_; ++c) out[c] += fine_[i * m_ + c];
  }

  Vec increment(std::uint64_t n, std::uint64_t j) {
    Vec out;
    increment(n, j, out);
    return out;
  }

 private:
  void ensure(std::uint64_t fine_upto) {
    const std::size_t need = static_cast<std::size_t>(fine_upto) * m_;
    while (fine_.size() < need) fine_.push_back(sqrt_h_ * stream_.next());
  }

  NormalStream stream_;
  std::size_t m_;
  std::uint64_t n_fine_;
  double sqrt_h_;
  std::vector<double> fine_;
};

}  // namespace nsfde
