#include "multipa/text.hpp"

#include <cctype>

namespace multipa {

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    // Apostrophes only survive between letters ("don't" but not "'quoted'").
    while (!current.empty() && current.back() == '\'') current.pop_back();
    std::size_t lead = 0;
    while (lead < current.size() && current[lead] == '\'') ++lead;
    if (lead < current.size()) words.push_back(current.substr(lead));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'') {
      current.push_back('\'');
    } else {
      // whitespace and punctuation both end a token
      flush();
    }
  }
  flush();
  return words;
}

RawTranscript make_transcript(std::string_view text, TranscriptSource source) {
  return RawTranscript{normalize_words(text), source};
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.append(sep);
    out.append(words[i]);
  }
  return out;
}

}  // namespace multipa
