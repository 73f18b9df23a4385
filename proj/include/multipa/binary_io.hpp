#pragma once

// Little helpers for the versioned binary records (feature bundles, cache
// entries, posterior sidecars, checkpoints). Values are stored in host byte
// order; records are a local cache format, not an interchange format.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "multipa/errors.hpp"

namespace multipa::binio {

inline void put_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n);
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  put_bytes(out, &value, sizeof(T));
}

inline void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

inline void put_matrix(std::vector<std::uint8_t>& out, const Eigen::MatrixXd& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes, std::string what = "record")
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Eigen::MatrixXd matrix() {
    const auto rows = get<std::uint64_t>();
    const auto cols = get<std::uint64_t>();
    if (cols != 0 && rows > (bytes_.size() - pos_) / sizeof(double) / cols) truncated();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>();
    }
    return m;
  }

  // Consumes and compares a fixed magic tag.
  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw PreconditionError("not a " + what_);
    }
    pos_ += magic.size();
  }

  bool done() const { return pos_ == bytes_.size(); }
  void expect_done() const {
    if (!done()) throw PreconditionError("trailing bytes in " + what_);
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) truncated();
  }
  [[noreturn]] void truncated() const { throw PreconditionError(what_ + " truncated"); }

  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to a uniquely named sibling temp file, then renames over `path`,
// so concurrent writers of the same path never expose a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace multipa::binio
