#pragma once

#include <algorithm>
#include <cstddef>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace multipa {

// Unit-cost Levenshtein distance over any two random-access ranges whose
// elements compare with ==. Two-row DP, O(|a|*|b|) time, O(|b|) space.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t levenshtein(const A& a, const B& b) {
  const auto n = static_cast<std::size_t>(std::ranges::size(a));
  const auto m = static_cast<std::size_t>(std::ranges::size(b));
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  auto ai = std::ranges::begin(a);
  auto bi = std::ranges::begin(b);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t subst = prev[j - 1] + (ai[i - 1] == bi[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein<std::string_view, std::string_view>(a, b);
}

}  // namespace multipa
