#pragma once

#include <span>

namespace multipa {

// Pearson correlation coefficient. Throws DegenerateInput when the lengths
// differ, fewer than two samples are given, or either sequence is constant.
double pcc(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator); requires n >= 2.
double sample_std(std::span<const double> x);

}  // namespace multipa
