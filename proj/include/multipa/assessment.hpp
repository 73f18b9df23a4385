#pragma once

// The contract between the scoring pipeline and its consumers (evaluation
// harness, CLI, HTTP service): one assessment of one utterance.

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "multipa/dataset.hpp"
#include "multipa/model.hpp"

namespace multipa {

// Closed response: the speaker read a known target text. Open response: the
// target is unknown and a second recognizer's output stands in for it.
enum class Mode { kClosed, kOpen };
std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);  // throws ConfigError

struct WordSpan {
  double start = 0.0;
  double end = 0.0;
};

struct AssessmentResult {
  Mode mode = Mode::kClosed;
  ScoreOutput scores;              // completeness present iff closed mode
  std::vector<WordSpan> word_spans;  // one per scored word (JSON: "start"/"end" on each word)
  std::string target_transcript;     // given text (closed) or ASRt output (open)
  std::string perceived_transcript;  // ASRp output; empty when perceived features are disabled
};
nlohmann::json to_json(const AssessmentResult& result);

// Anything that can score dataset utterances. assess() throws
// AssessmentUnavailable when the utterance cannot be scored; align_truth()
// force-aligns the record's ground-truth text to its audio (open-response
// target remapping) and throws AlignmentFailure on failure.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual AssessmentResult assess(const DatasetRecord& record, Mode mode) const = 0;
  virtual AlignedTranscript align_truth(const DatasetRecord& record) const = 0;
};

}  // namespace multipa
