#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "multipa/errors.hpp"

namespace multipa::detail {

// Parses "<prefix><positive int>" model ids such as "logmel-40".
inline std::size_t parse_sized_model_id(std::string_view id, std::string_view prefix, std::size_t max_value) {
  std::size_t value = 0;
  if (id.substr(0, prefix.size()) == prefix) {
    const auto rest = id.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
    if (ec == std::errc{} && ptr == rest.data() + rest.size() && value > 0 && value <= max_value) return value;
  }
  throw ModelUnavailable("unknown model id '" + std::string(id) + "' (expected " + std::string(prefix) + "<n>)");
}

}  // namespace multipa::detail
