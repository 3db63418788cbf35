#pragma once

#include <random>
#include <string>

namespace hamcouple::testdata {

// Random smooth expression over x, y, z that stays inside every domain.
inline std::string random_smooth(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 10);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  static const char* vars[] = {"x", "y", "z"};
  switch (pick(rng)) {
    case 0:
    case 1:
      return vars[std::uniform_int_distribution<int>(0, 2)(rng)];
    case 2:
      return std::to_string(coef(rng));
    case 3:
      return "(" + random_smooth(rng, depth - 1) + " + " + random_smooth(rng, depth - 1) + ")";
    case 4:
      return "(" + random_smooth(rng, depth - 1) + " - " + random_smooth(rng, depth - 1) + ")";
    case 5:
      return "(" + random_smooth(rng, depth - 1) + " * " + random_smooth(rng, depth - 1) + ")";
    case 6:
      return "sin(" + random_smooth(rng, depth - 1) + ")";
    case 7:
      return "cos(" + random_smooth(rng, depth - 1) + ")";
    case 8:
      return "atan(" + random_smooth(rng, depth - 1) + ")";
    case 9:
      return "exp(sin(" + random_smooth(rng, depth - 1) + "))";
    default:
      return "(" + random_smooth(rng, depth - 1) + " / (2 + cos(" + random_smooth(rng, depth - 1) + ")))";
  }
}

}  // namespace hamcouple::testdata
