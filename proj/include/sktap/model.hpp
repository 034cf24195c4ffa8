#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "sktap/errors.hpp"

namespace sktap {

// System size, coupling variance scale t (= beta^2) and per-site fields.
struct ModelParams {
  std::size_t n = 1;
  double t = 0.0;
  std::vector<double> field;
  std::size_t enum_cap = 24;

  static ModelParams uniform(std::size_t n, double t, double h, std::size_t enum_cap = 24) {
    ModelParams p;
    p.n = n;
    p.t = t;
    p.field.assign(n, h);
    p.enum_cap = enum_cap;
    return p;
  }

  void validate() const {
    require(n >= 1, "ModelParams: n must be >= 1");
    require(std::isfinite(t) && t >= 0.0, "ModelParams: t must be finite and >= 0");
    require(field.size() == n, "ModelParams: field must have length n");
    require(enum_cap >= 1 && enum_cap <= 40, "ModelParams: enum_cap must lie in [1, 40]");
    for (double h : field) require(std::isfinite(h), "ModelParams: non-finite field");
  }
};

// Where a sampled matrix came from; recorded in serialized output.
struct SampleOrigin {
  double t = 0.0;
  std::uint64_t seed = 0;
};

// Symmetric coupling matrix with zero diagonal. Entries (i,j) and (j,i) share
// a single stored value, so symmetry is exact by construction.
class CouplingMatrix {
 public:
  CouplingMatrix() = default;
  explicit CouplingMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, double value) {
    require(i < n_ && j < n_, "CouplingMatrix::set: index out of range");
    require(i != j || value == 0.0, "CouplingMatrix::set: diagonal must stay zero");
    entries_[i * n_ + j] = value;
    entries_[j * n_ + i] = value;
  }

  // Row-major n x n view.
  const std::vector<double>& entries() const noexcept { return entries_; }

  const std::optional<SampleOrigin>& origin() const noexcept { return origin_; }
  void set_origin(SampleOrigin o) { origin_ = o; }

  friend bool operator==(const CouplingMatrix& a, const CouplingMatrix& b) {
    return a.n_ == b.n_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  std::optional<SampleOrigin> origin_;
};

// Index of the unordered pair {i, j}, i != j, in row-major upper-triangle order.
inline std::size_t pair_index(std::size_t n, std::size_t i, std::size_t j) noexcept {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::size_t pair_count(std::size_t n) noexcept { return n * (n - 1) / 2; }

inline CouplingMatrix sample_couplings(const ModelParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t n = params.n;
  CouplingMatrix g(n);
  g.set_origin({params.t, seed});
  if (params.t == 0.0) return g;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(params.t / static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.set(i, j, normal(rng));
  return g;
}

// Couplings as Brownian motions in the interaction time, sampled on a grid.
// values(k) is the coupling matrix at grid[k]; increments(k) = values(k+1) - values(k).
class CouplingPath {
 public:
  // grid must start at 0 and be strictly increasing; increments holds
  // (grid.size() - 1) * n(n-1)/2 values, step-major, pairs in pair_index order.
  CouplingPath(std::size_t n, std::vector<double> grid, std::vector<double> increments)
      : n_(n), grid_(std::move(grid)), increments_(std::move(increments)) {
    require(n_ >= 1, "CouplingPath: n must be >= 1");
    require(!grid_.empty() && grid_.front() == 0.0, "CouplingPath: grid must start at 0");
    for (std::size_t k = 1; k < grid_.size(); ++k)
      require(grid_[k] > grid_[k - 1], "CouplingPath: grid must be strictly increasing");
    const std::size_t p = pair_count(n_);
    require(increments_.size() == steps() * p, "CouplingPath: increment count mismatch");
    values_.assign((steps() + 1) * p, 0.0);
    for (std::size_t k = 0; k < steps(); ++k)
      for (std::size_t q = 0; q < p; ++q)
        values_[(k + 1) * p + q] = values_[k * p + q] + increments_[k * p + q];
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t steps() const noexcept { return grid_.size() - 1; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  double final_time() const noexcept { return grid_.back(); }

  double value(std::size_t k, std::size_t i, std::size_t j) const noexcept {
    return i == j ? 0.0 : values_[k * pair_count(n_) + pair_index(n_, i, j)];
  }

  double increment(std::size_t k, std::size_t i, std::size_t j) const noexcept {
    return i == j ? 0.0 : increments_[k * pair_count(n_) + pair_index(n_, i, j)];
  }

  CouplingMatrix at(std::size_t k) const {
    require(k <= steps(), "CouplingPath::at: grid index out of range");
    CouplingMatrix g(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) g.set(i, j, value(k, i, j));
    return g;
  }

  CouplingMatrix terminal() const { return at(steps()); }

  // Matrix whose row/column `row` is taken at grid point k while every other
  // coupling sits at its terminal value.
  CouplingMatrix with_row_at(std::size_t k, std::size_t row) const {
    require(row < n_, "CouplingPath::with_row_at: row out of range");
    CouplingMatrix g = terminal();
    for (std::size_t j = 0; j < n_; ++j)
      if (j != row) g.set(row, j, value(k, row, j));
    return g;
  }

  // Same Brownian path observed on every `factor`-th grid point.
  CouplingPath coarsen(std::size_t factor) const {
    require(factor >= 1 && steps() % factor == 0, "CouplingPath::coarsen: factor must divide steps");
    const std::size_t p = pair_count(n_);
    const std::size_t coarse = steps() / factor;
    std::vector<double> grid(coarse + 1);
    std::vector<double> inc(coarse * p);
    for (std::size_t k = 0; k <= coarse; ++k) grid[k] = grid_[k * factor];
    for (std::size_t k = 0; k < coarse; ++k)
      for (std::size_t q = 0; q < p; ++q)
        inc[k * p + q] = values_[(k + 1) * factor * p + q] - values_[k * factor * p + q];
    return CouplingPath(n_, std::move(grid), std::move(inc));
  }

 private:
  std::size_t n_;
  std::vector<double> grid_;
  std::vector<double> increments_;
  std::vector<double> values_;
};

// Uniform grid on [0, t]; each pair gets independent N(0, ds/n) increments.
inline CouplingPath sample_path(const ModelParams& params, std::size_t steps, std::uint64_t seed) {
  params.validate();
  require(steps >= 1, "sample_path: steps must be >= 1");
  require(params.t > 0.0, "sample_path: t must be > 0");
  const std::size_t n = params.n;
  const std::size_t p = pair_count(n);
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    grid[k] = params.t * static_cast<double>(k) / static_cast<double>(steps);
  grid.back() = params.t;

  std::mt19937_64 rng(seed);
  std::vector<double> inc(steps * p);
  for (std::size_t k = 0; k < steps; ++k) {
    std::normal_distribution<double> normal(0.0, std::sqrt((grid[k + 1] - grid[k]) / static_cast<double>(n)));
    for (std::size_t q = 0; q < p; ++q) inc[k * p + q] = normal(rng);
  }
  return CouplingPath(n, std::move(grid), std::move(inc));
}

}  // namespace sktap
