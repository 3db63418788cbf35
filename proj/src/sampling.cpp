#include "hamcouple/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace hamcouple {

namespace {
constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

Halton::Halton(std::size_t dim, std::uint64_t offset) : index_(offset + 1) {
  if (dim > std::size(kPrimes)) throw std::invalid_argument("Halton dimension too large");
  bases_.assign(kPrimes, kPrimes + dim);
}

std::vector<double> Halton::next() {
  std::vector<double> p(bases_.size());
  for (std::size_t i = 0; i < bases_.size(); ++i) p[i] = radical_inverse(index_, bases_[i]);
  ++index_;
  return p;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

std::vector<double> logspace(double log10_a, double log10_b, std::size_t n) {
  auto e = linspace(log10_a, log10_b, n);
  for (auto& x : e) x = std::pow(10.0, x);
  return e;
}

}  // namespace hamcouple
