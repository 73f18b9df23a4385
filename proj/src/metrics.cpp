#include "multipa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "multipa/errors.hpp"

namespace multipa {

double mean(std::span<const double> x) {
  if (x.empty()) throw DegenerateInput("mean of an empty sequence");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) throw DegenerateInput("standard deviation needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double pcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DegenerateInput("pcc: length mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DegenerateInput("pcc: need at least two samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pcc: constant sequence");
  // sqrt(a * a) == a exactly in IEEE arithmetic, so x == y gives exactly 1.
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace multipa
