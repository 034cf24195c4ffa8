#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sktap/errors.hpp"
#include "sktap/parallel.hpp"

namespace sktap {

// An Ising system over K "active" spins: the sites left after clamping and
// removal, with clamped spins folded into the effective fields.
struct ActiveSystem {
  std::vector<std::size_t> sites;  // global label of each active spin
  std::vector<double> field;       // effective field per active spin
  std::vector<double> coupling;    // K x K row-major, zero diagonal

  std::size_t size() const noexcept { return sites.size(); }
  double coupling_at(std::size_t a, std::size_t b) const noexcept { return coupling[a * size() + b]; }
};

// Configuration handed to accumulators. local_field[a] = field[a] + sum_b J_ab spin[b],
// so flipping a changes the energy by -2 spin[a] local_field[a].
// flipped is the spin flipped to reach this state from the previous one
// (kNoFlip for the first state of a block).
inline constexpr std::size_t kNoFlip = static_cast<std::size_t>(-1);

struct SpinState {
  std::span<const double> spin;
  std::span<const double> local_field;
  double energy;
  std::size_t flipped = kNoFlip;
};

struct EnumerationOptions {
  std::size_t threads = 1;
  // States per block are 2^block_bits. The block layout depends on the system
  // size only, never on the thread count, so results are bit-stable.
  unsigned block_bits = 14;
};

// acc holds sums weighted by exp(H - shift); weight is the matching sum of
// exp(H - shift) itself.
template <class Acc>
struct Enumerated {
  Acc acc;
  double weight = 0.0;
  double shift = 0.0;

  double log_z() const { return shift + std::log(weight); }
};

namespace detail {

template <class Acc>
void rebase(Enumerated<Acc>& e, double new_shift) {
  const double f = std::exp(e.shift - new_shift);
  e.acc.scale(f);
  e.weight *= f;
  e.shift = new_shift;
}

template <class Acc>
Enumerated<Acc> combine(Enumerated<Acc> a, Enumerated<Acc> b) {
  if (a.shift < b.shift) std::swap(a, b);
  rebase(b, a.shift);
  a.acc.merge(b.acc);
  a.weight += b.weight;
  return a;
}

template <class Acc>
Enumerated<Acc> enumerate_block(const ActiveSystem& sys, const Acc& prototype, std::uint64_t begin,
                                std::uint64_t end) {
  const std::size_t k = sys.size();
  std::vector<double> spin(k), lf(k);
  const std::uint64_t gray = begin ^ (begin >> 1);
  for (std::size_t a = 0; a < k; ++a) spin[a] = ((gray >> a) & 1U) ? -1.0 : 1.0;
  double energy = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double s = sys.field[a];
    const double* row = &sys.coupling[a * k];
    for (std::size_t b = 0; b < k; ++b) s += row[b] * spin[b];
    lf[a] = s;
    energy += 0.5 * spin[a] * (s + sys.field[a]);
  }

  Enumerated<Acc> out{prototype, 0.0, energy};
  const std::span<const double> spin_view(spin), lf_view(lf);
  std::size_t flipped = kNoFlip;
  for (std::uint64_t idx = begin;;) {
    if (energy > out.shift) rebase(out, energy);
    const double w = std::exp(energy - out.shift);
    out.weight += w;
    out.acc.add(w, SpinState{spin_view, lf_view, energy, flipped});

    if (++idx == end) break;
    const auto a = static_cast<std::size_t>(std::countr_zero(idx));
    flipped = a;
    const double old = spin[a];
    energy -= 2.0 * old * lf[a];
    spin[a] = -old;
    const double d = -2.0 * old;
    const double* row = &sys.coupling[a * k];
    for (std::size_t c = 0; c < k; ++c) lf[c] += d * row[c];
  }
  return out;
}

template <class Acc>
Enumerated<Acc> reduce_tree(std::vector<Enumerated<Acc>>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  return combine(reduce_tree(parts, lo, mid), reduce_tree(parts, mid, hi));
}

}  // namespace detail

// Sums exp(H) and prototype-shaped accumulators over all 2^K configurations
// in Gray-code order with O(K) incremental updates per state.
template <class Acc>
Enumerated<Acc> enumerate_states(const ActiveSystem& sys, const Acc& prototype,
                                 const EnumerationOptions& opts = {}) {
  const std::size_t k = sys.size();
  require(k <= 40, "enumerate_states: too many active spins");
  const std::uint64_t total = std::uint64_t{1} << k;
  if (k <= opts.block_bits) return detail::enumerate_block(sys, prototype, 0, total);

  const std::uint64_t block = std::uint64_t{1} << opts.block_bits;
  const auto blocks = static_cast<std::size_t>(total / block);
  std::vector<Enumerated<Acc>> parts(blocks, Enumerated<Acc>{prototype, 0.0, 0.0});
  parallel_for(blocks, opts.threads, [&](std::size_t b) {
    parts[b] = detail::enumerate_block(sys, prototype, b * block, (b + 1) * block);
  });
  return detail::reduce_tree(parts, 0, blocks);
}

// ---------------------------------------------------------------------------
// Accumulators. Each supports add(w, state), scale(f) and merge(other).

// First moments, plus optionally the products with one fixed spin.
class FirstMoments {
 public:
  explicit FirstMoments(std::size_t k, std::optional<std::size_t> column = std::nullopt)
      : column_(column), first_(k, 0.0), cross_(column ? k : 0, 0.0) {}

  void add(double w, const SpinState& s) {
    const std::size_t k = first_.size();
    for (std::size_t a = 0; a < k; ++a) first_[a] += w * s.spin[a];
    if (column_) {
      const double wc = w * s.spin[*column_];
      for (std::size_t a = 0; a < k; ++a) cross_[a] += wc * s.spin[a];
    }
  }
  void scale(double f) {
    for (double& x : first_) x *= f;
    for (double& x : cross_) x *= f;
  }
  void merge(const FirstMoments& o) {
    for (std::size_t a = 0; a < first_.size(); ++a) first_[a] += o.first_[a];
    for (std::size_t a = 0; a < cross_.size(); ++a) cross_[a] += o.cross_[a];
  }

  const std::optional<std::size_t>& column() const noexcept { return column_; }
  const std::vector<double>& first() const noexcept { return first_; }
  const std::vector<double>& cross() const noexcept { return cross_; }

 private:
  std::optional<std::size_t> column_;
  std::vector<double> first_;
  std::vector<double> cross_;
};

// First and all second moments; optionally sum w s_j s_k s_l over l for a
// fixed (j, k).
class PairMoments {
 public:
  explicit PairMoments(std::size_t k, std::optional<std::pair<std::size_t, std::size_t>> triple = std::nullopt)
      : k_(k), triple_(triple), first_(k, 0.0), second_(k * k, 0.0), third_(triple ? k : 0, 0.0) {}

  void add(double w, const SpinState& s) {
    for (std::size_t a = 0; a < k_; ++a) {
      const double ws = w * s.spin[a];
      first_[a] += ws;
      double* row = &second_[a * k_];
      for (std::size_t b = 0; b < k_; ++b) row[b] += ws * s.spin[b];
    }
    if (triple_) {
      const double wjk = w * s.spin[triple_->first] * s.spin[triple_->second];
      for (std::size_t a = 0; a < k_; ++a) third_[a] += wjk * s.spin[a];
    }
  }
  void scale(double f) {
    for (double& x : first_) x *= f;
    for (double& x : second_) x *= f;
    for (double& x : third_) x *= f;
  }
  void merge(const PairMoments& o) {
    for (std::size_t a = 0; a < first_.size(); ++a) first_[a] += o.first_[a];
    for (std::size_t a = 0; a < second_.size(); ++a) second_[a] += o.second_[a];
    for (std::size_t a = 0; a < third_.size(); ++a) third_[a] += o.third_[a];
  }

  std::size_t size() const noexcept { return k_; }
  const std::optional<std::pair<std::size_t, std::size_t>>& triple() const noexcept { return triple_; }
  const std::vector<double>& first() const noexcept { return first_; }
  double second(std::size_t a, std::size_t b) const noexcept { return second_[a * k_ + b]; }
  const std::vector<double>& third() const noexcept { return third_; }

 private:
  std::size_t k_;
  std::optional<std::pair<std::size_t, std::size_t>> triple_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::vector<double> third_;
};

// Raw moments of one index triple (repeats allowed):
// products s_a, s_b, s_c, s_a s_b, s_a s_c, s_b s_c, s_a s_b s_c.
class TripleMoments {
 public:
  TripleMoments(std::size_t a, std::size_t b, std::size_t c) : a_(a), b_(b), c_(c) {}

  void add(double w, const SpinState& s) {
    const double x = s.spin[a_], y = s.spin[b_], z = s.spin[c_];
    sums_[0] += w * x;
    sums_[1] += w * y;
    sums_[2] += w * z;
    sums_[3] += w * x * y;
    sums_[4] += w * x * z;
    sums_[5] += w * y * z;
    sums_[6] += w * x * y * z;
  }
  void scale(double f) {
    for (double& v : sums_) v *= f;
  }
  void merge(const TripleMoments& o) {
    for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += o.sums_[i];
  }

  // Centered third moment given the total weight.
  double centered(double weight) const {
    const double ma = sums_[0] / weight, mb = sums_[1] / weight, mc = sums_[2] / weight;
    const double ab = sums_[3] / weight, ac = sums_[4] / weight, bc = sums_[5] / weight;
    const double abc = sums_[6] / weight;
    return abc - ma * bc - mb * ac - mc * ab + 2.0 * ma * mb * mc;
  }

 private:
  std::size_t a_, b_, c_;
  std::array<double, 7> sums_{};
};

// Cavity first moments for every site at once. The cavity measure of site a
// (a removed) satisfies exp(H^(a)) = exp(H - s_a L_a), where L_a is the local
// field of a; summing the reweighted full configurations counts each cavity
// configuration twice with equal weight, so ratios are exact.
// The factors exp(-s_a L_a) are updated multiplicatively along the Gray code
// and recomputed from scratch every kResync states.
class CavityMoments {
 public:
  static constexpr std::size_t kResync = 64;

  explicit CavityMoments(const ActiveSystem& sys)
      : k_(sys.size()), up_(k_ * k_), down_(k_ * k_), factor_(k_), weight_(k_, 0.0), first_(k_ * k_, 0.0) {
    for (std::size_t i = 0; i < k_ * k_; ++i) {
      up_[i] = std::exp(2.0 * sys.coupling[i]);
      down_[i] = std::exp(-2.0 * sys.coupling[i]);
    }
  }

  void add(double w, const SpinState& s) {
    if (s.flipped == kNoFlip || ++since_sync_ == kResync) {
      for (std::size_t a = 0; a < k_; ++a) factor_[a] = std::exp(-s.spin[a] * s.local_field[a]);
      since_sync_ = 0;
    } else {
      // s_c L_c moves by 2 s_c s_f g_cf (new s_f); the flipped factor inverts.
      const std::size_t f = s.flipped;
      const double inv = 1.0 / factor_[f];
      const double* up = &up_[f * k_];
      const double* down = &down_[f * k_];
      const double sf = s.spin[f];
      for (std::size_t c = 0; c < k_; ++c) factor_[c] *= s.spin[c] * sf > 0.0 ? down[c] : up[c];
      factor_[f] = inv;
    }
    const double* __restrict spin = s.spin.data();
    for (std::size_t a = 0; a < k_; ++a) {
      const double r = w * factor_[a];
      weight_[a] += r;
      double* __restrict out = &first_[a * k_];
      for (std::size_t b = 0; b < k_; ++b) out[b] += r * spin[b];
    }
  }
  void scale(double f) {
    for (double& x : weight_) x *= f;
    for (double& x : first_) x *= f;
  }
  void merge(const CavityMoments& o) {
    for (std::size_t a = 0; a < weight_.size(); ++a) weight_[a] += o.weight_[a];
    for (std::size_t a = 0; a < first_.size(); ++a) first_[a] += o.first_[a];
  }

  // <s_b> in the system with a removed (b != a).
  double magnetization(std::size_t a, std::size_t b) const noexcept { return first_[a * k_ + b] / weight_[a]; }

 private:
  std::size_t k_;
  std::vector<double> up_;    // exp(2 g_ab)
  std::vector<double> down_;  // exp(-2 g_ab)
  std::vector<double> factor_;
  std::size_t since_sync_ = 0;
  std::vector<double> weight_;
  std::vector<double> first_;
};

}  // namespace sktap
