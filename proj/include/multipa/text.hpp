#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "multipa/types.hpp"

namespace multipa {

// Lowercase, strip punctuation (apostrophes inside words survive), collapse
// whitespace, split into tokens.
std::vector<std::string> normalize_words(std::string_view text);

RawTranscript make_transcript(std::string_view text, TranscriptSource source);

std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ");

}  // namespace multipa
