#include "multipa/phones.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "multipa/edit_distance.hpp"
#include "multipa/errors.hpp"

namespace multipa {

namespace detail {
extern const char* const kBuiltinLexicon;
}

PhoneInventory::PhoneInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) index_.emplace(symbols_[i], i);
  silence_ = index_.at("[SIL]");
}

const PhoneInventory& PhoneInventory::arpabet() {
  static const PhoneInventory inventory({
      "[SIL]", "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
      "F",     "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY", "P",
      "R",     "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH",
  });
  return inventory;
}

std::optional<std::size_t> PhoneInventory::find(std::string_view label) const {
  const auto it = index_.find(canonical_label(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PhoneInventory::index_of(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw PreconditionError("phone '" + std::string(label) + "' is not in the inventory");
}

std::string PhoneInventory::canonical_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (std::isdigit(static_cast<unsigned char>(c))) continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (out == "SIL" || out == "SP" || out == "<SIL>" || out.empty()) return "[SIL]";
  return out;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = from_text(detail::kBuiltinLexicon);
  return lexicon;
}

Lexicon Lexicon::from_text(std::string_view text) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  const auto& inventory = PhoneInventory::arpabet();
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind(";;;", 0) == 0) continue;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    if (auto paren = word.find('('); paren != std::string::npos) word.erase(paren);
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::vector<std::string> phones;
    std::string phone;
    while (fields >> phone) {
      const auto idx = inventory.find(phone);
      if (!idx || *idx == inventory.silence_index()) {
        throw PreconditionError("lexicon line " + std::to_string(line_no) + ": unknown phone '" + phone + "'");
      }
      phones.push_back(inventory.symbol(*idx));
    }
    if (phones.empty()) throw PreconditionError("lexicon line " + std::to_string(line_no) + ": no phones");
    // first pronunciation wins
    lex.entries_.emplace(std::move(word), std::move(phones));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open lexicon " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::vector<std::string> Lexicon::pronounce(std::string_view word) const {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;
  return letter_to_sound(word);
}

bool Lexicon::contains(std::string_view word) const { return entries_.find(word) != entries_.end(); }

std::vector<std::string> Lexicon::words() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [w, _] : entries_) out.push_back(w);
  return out;
}

std::string Lexicon::nearest_word(const std::vector<std::string>& phones) const {
  std::string best;
  std::size_t best_cost = std::numeric_limits<std::size_t>::max();
  for (const auto& [word, pron] : entries_) {
    const std::size_t cost = levenshtein(pron, phones);
    if (cost < best_cost) {
      best_cost = cost;
      best = word;
      if (cost == 0) break;
    }
  }
  return best;
}

void Lexicon::add(std::string word, std::vector<std::string> phones) {
  entries_.insert_or_assign(std::move(word), std::move(phones));
}

std::vector<std::string> letter_to_sound(std::string_view word) {
  struct Rule {
    std::string_view letters;
    std::vector<std::string> phones;
  };
  static const std::vector<Rule> kRules = {
      {"tch", {"CH"}}, {"igh", {"AY"}}, {"th", {"TH"}}, {"sh", {"SH"}}, {"ch", {"CH"}},
      {"ng", {"NG"}},  {"ph", {"F"}},   {"ck", {"K"}},  {"wh", {"W"}},  {"qu", {"K", "W"}},
      {"ee", {"IY"}},  {"ea", {"IY"}},  {"oo", {"UW"}}, {"ou", {"AW"}}, {"ow", {"OW"}},
      {"ai", {"EY"}},  {"ay", {"EY"}},  {"oa", {"OW"}}, {"oi", {"OY"}}, {"oy", {"OY"}},
      {"au", {"AO"}},  {"aw", {"AO"}},  {"er", {"ER"}}, {"ir", {"ER"}}, {"ur", {"ER"}},
      {"a", {"AE"}},   {"b", {"B"}},    {"c", {"K"}},   {"d", {"D"}},   {"e", {"EH"}},
      {"f", {"F"}},    {"g", {"G"}},    {"h", {"HH"}},  {"i", {"IH"}},  {"j", {"JH"}},
      {"k", {"K"}},    {"l", {"L"}},    {"m", {"M"}},   {"n", {"N"}},   {"o", {"AA"}},
      {"p", {"P"}},    {"q", {"K"}},    {"r", {"R"}},   {"s", {"S"}},   {"t", {"T"}},
      {"u", {"AH"}},   {"v", {"V"}},    {"w", {"W"}},   {"x", {"K", "S"}}, {"y", {"Y"}},
      {"z", {"Z"}},
  };
  std::string w;
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // silent final e after a consonant
  if (w.size() > 2 && w.back() == 'e' && std::string_view("aeiou").find(w[w.size() - 2]) == std::string_view::npos) {
    w.pop_back();
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < w.size()) {
    if (i > 0 && w[i] == w[i - 1] && w[i] != 'e' && w[i] != 'o') {  // doubled consonants
      ++i;
      continue;
    }
    bool matched = false;
    for (const Rule& r : kRules) {
      if (std::string_view(w).substr(i, r.letters.size()) == r.letters) {
        std::vector<std::string> phones = r.phones;
        if (r.letters == "y" && i > 0) phones = {"IY"};
        out.insert(out.end(), phones.begin(), phones.end());
        i += r.letters.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  if (out.empty()) out.push_back("AH");
  return out;
}

}  // namespace multipa
