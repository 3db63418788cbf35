#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hamcouple {

/// Radical inverse of `index` in the given prime base, in [0, 1).
double radical_inverse(std::uint64_t index, unsigned base);

/// Deterministic low-discrepancy points in [0, 1)^dim. Index 0 is skipped
/// so the first point is not the origin.
class Halton {
 public:
  explicit Halton(std::size_t dim, std::uint64_t offset = 0);
  std::vector<double> next();

 private:
  std::vector<unsigned> bases_;
  std::uint64_t index_;
};

std::vector<double> linspace(double a, double b, std::size_t n);
std::vector<double> logspace(double log10_a, double log10_b, std::size_t n);

}  // namespace hamcouple
