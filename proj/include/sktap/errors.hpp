#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sktap {

// Input validation failures are reported as std::invalid_argument.
// NumericalError covers non-convergence, singular operators and the like.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical failure inside one disorder sample of an ensemble run.
class SampleFailure : public NumericalError {
 public:
  SampleFailure(const std::string& what, std::size_t n, std::uint64_t seed)
      : NumericalError(what + " (n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")"),
        n_(n),
        seed_(seed) {}

  std::size_t n() const noexcept { return n_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::size_t n_;
  std::uint64_t seed_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace sktap
