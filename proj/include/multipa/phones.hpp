#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace multipa {

// Stress-free ARPAbet inventory (39 phones) plus a silence symbol. Index
// order is stable and defines the layout of every posterior vector and
// multi-hot phone vector.
class PhoneInventory {
 public:
  static const PhoneInventory& arpabet();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t index) const { return symbols_.at(index); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;  // throws PreconditionError
  std::size_t silence_index() const { return silence_; }
  bool is_silence(std::string_view label) const { return label == symbols_[silence_]; }

  // Strips ARPAbet stress digits ("AH0" -> "AH") and uppercases.
  static std::string canonical_label(std::string_view label);

 private:
  explicit PhoneInventory(std::vector<std::string> symbols);
  std::vector<std::string> symbols_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t silence_ = 0;
};

// Word -> phone sequence lookup with a letter-to-sound fallback for
// out-of-vocabulary words.
class Lexicon {
 public:
  // Built-in lexicon covering the bundled fixtures and common English words.
  static const Lexicon& builtin();

  // CMUdict-style text: "WORD  P1 P2 ..." per line; ';;;' comments; stress
  // digits and "(2)" variant markers are accepted and stripped.
  static Lexicon from_text(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);

  std::vector<std::string> pronounce(std::string_view word) const;
  bool contains(std::string_view word) const;
  std::vector<std::string> words() const;

  // Reverse lookup: the lexicon word whose pronunciation is closest to the
  // phone sequence by phone-level edit distance (ties broken alphabetically).
  std::string nearest_word(const std::vector<std::string>& phones) const;

  void add(std::string word, std::vector<std::string> phones);

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// Rule-based letter-to-sound used for words missing from the lexicon.
std::vector<std::string> letter_to_sound(std::string_view word);

}  // namespace multipa
