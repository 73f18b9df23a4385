#include "multipa/assessment.hpp"

#include "multipa/errors.hpp"

namespace multipa {

std::string_view to_string(Mode mode) { return mode == Mode::kClosed ? "closed" : "open"; }

Mode mode_from_string(std::string_view name) {
  if (name == "closed") return Mode::kClosed;
  if (name == "open") return Mode::kOpen;
  throw ConfigError("mode must be \"closed\" or \"open\", got \"" + std::string(name) + "\"");
}

nlohmann::json to_json(const AssessmentResult& result) {
  nlohmann::json j = to_json(result.scores);
  auto& words = j["words"];
  for (std::size_t w = 0; w < words.size() && w < result.word_spans.size(); ++w) {
    words[w]["start"] = result.word_spans[w].start;
    words[w]["end"] = result.word_spans[w].end;
  }
  j["mode"] = std::string(to_string(result.mode));
  j["target_transcript"] = result.target_transcript;
  j["perceived_transcript"] = result.perceived_transcript;
  return j;
}

}  // namespace multipa
