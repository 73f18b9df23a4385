#include "multipa/dataset.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "multipa/binary_io.hpp"
#include "multipa/errors.hpp"
#include "multipa/text.hpp"

namespace multipa {

namespace fs = std::filesystem;

namespace {

Label read_label(const nlohmann::json& obj, const char* key, const std::string& id) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_number()) throw SchemaViolation(id, std::string("label '") + key + "' is not a number");
  return obj.at(key).get<double>();
}

void check_range(const Label& v, const std::array<double, 2>& range, const std::string& id, const std::string& what) {
  if (v && !(*v >= range[0] && *v <= range[1])) {
    std::ostringstream msg;
    msg << what << " = " << *v << " outside [" << range[0] << ", " << range[1] << "]";
    throw SchemaViolation(id, msg.str());
  }
}

nlohmann::json label_json(const Label& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaViolation("", "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation("", path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw SchemaViolation("", "unknown split '" + std::string(name) + "'");
}

std::vector<const DatasetRecord*> Dataset::split(Split which) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == which) out.push_back(&r);
  }
  return out;
}

std::vector<DatasetRecord> parse_manifest(const nlohmann::json& doc, const fs::path& base_dir, LabelRanges& ranges) {
  if (!doc.is_object() || doc.value("format", std::string()) != kManifestFormat) {
    throw SchemaViolation("", "not a multipa manifest (missing \"format\": \"multipa-manifest\")");
  }
  if (doc.value("version", 0) != kManifestVersion) {
    throw SchemaViolation("", "unsupported manifest version " + doc.value("version", nlohmann::json()).dump());
  }
  if (doc.contains("label_ranges")) {
    try {
      ranges = doc.at("label_ranges").get<LabelRanges>();
    } catch (const ConfigError& e) {
      throw SchemaViolation("", e.what());
    }
  }
  const Split split = split_from_string(doc.value("split", std::string("train")));
  if (!doc.contains("records") || !doc.at("records").is_array()) throw SchemaViolation("", "manifest has no records array");
  std::vector<DatasetRecord> out;
  std::size_t index = 0;
  for (const auto& r : doc.at("records")) {
    const std::string fallback_id = "record #" + std::to_string(index++);
    if (!r.is_object()) throw SchemaViolation(fallback_id, "record is not an object");
    DatasetRecord rec;
    rec.split = split;
    try {
      rec.utterance_id = r.at("utterance_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw SchemaViolation(fallback_id, "missing utterance_id");
    }
    const std::string& id = rec.utterance_id;
    if (id.empty()) throw SchemaViolation(fallback_id, "empty utterance_id");
    try {
      rec.audio_path = base_dir / r.at("audio").get<std::string>();
      rec.target_text = r.at("target_text").get<std::string>();
      rec.speaker = r.value("speaker", std::string());
    } catch (const nlohmann::json::exception&) {
      throw SchemaViolation(id, "audio and target_text must be strings");
    }
    if (!fs::is_regular_file(rec.audio_path)) throw SchemaViolation(id, "audio file not found: " + rec.audio_path.string());
    rec.target_words = normalize_words(rec.target_text);
    if (rec.target_words.empty()) throw SchemaViolation(id, "target_text has no words");

    const auto sentence = r.value("sentence_labels", nlohmann::json::object());
    if (!sentence.is_object()) throw SchemaViolation(id, "sentence_labels must be an object");
    for (std::size_t i = 0; i < kSentenceLabelDims; ++i) rec.sentence_labels[i] = read_label(sentence, kSentenceLabelNames[i], id);
    for (std::size_t i = 0; i < kSentenceOutputs; ++i) {
      check_range(rec.sentence_labels[kSentenceOutputLabelIndex[i]], ranges.sentence[i], id,
                  std::string("sentence ") + kSentenceLabelNames[kSentenceOutputLabelIndex[i]]);
    }
    check_range(rec.sentence_labels[kCompletenessLabelIndex], ranges.completeness, id, "sentence completeness");

    const auto words = r.value("word_labels", nlohmann::json::array());
    if (!words.is_array()) throw SchemaViolation(id, "word_labels must be an array");
    if (!words.empty() && words.size() != rec.target_words.size()) {
      throw SchemaViolation(id, "word_labels has " + std::to_string(words.size()) + " entries but target_text has " +
                                    std::to_string(rec.target_words.size()) + " words");
    }
    for (std::size_t w = 0; w < words.size(); ++w) {
      WordLabel wl;
      wl.word = words[w].value("word", rec.target_words[w]);
      const auto normalized = normalize_words(wl.word);
      if (normalized.size() != 1 || normalized.front() != rec.target_words[w]) {
        throw SchemaViolation(id, "word label " + std::to_string(w) + " ('" + wl.word + "') does not match target word '" +
                                      rec.target_words[w] + "'");
      }
      wl.word = rec.target_words[w];
      for (std::size_t i = 0; i < kWordOutputs; ++i) {
        wl.scores[i] = read_label(words[w], kWordDimNames[i], id);
        check_range(wl.scores[i], ranges.word[i], id, std::string("word ") + kWordDimNames[i]);
      }
      rec.word_labels.push_back(std::move(wl));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Dataset load_dataset(const fs::path& path) {
  Dataset ds;
  std::vector<fs::path> manifests;
  if (fs::is_directory(path)) {
    for (const char* name : {"train.json", "test.json"}) {
      if (fs::is_regular_file(path / name)) manifests.push_back(path / name);
    }
    if (manifests.empty()) throw SchemaViolation("", "no train.json or test.json in " + path.string());
  } else if (fs::is_regular_file(path)) {
    manifests.push_back(path);
  } else {
    throw SchemaViolation("", "dataset path does not exist: " + path.string());
  }
  std::set<std::string> ids;
  bool first = true;
  for (const auto& m : manifests) {
    LabelRanges ranges;
    auto records = parse_manifest(read_json_file(m), m.parent_path(), ranges);
    if (first) {
      ds.ranges = ranges;
      first = false;
    } else if (nlohmann::json(ranges) != nlohmann::json(ds.ranges)) {
      throw SchemaViolation("", "manifests declare different label ranges");
    }
    for (auto& r : records) {
      if (!ids.insert(r.utterance_id).second) throw SchemaViolation(r.utterance_id, "duplicate utterance_id");
      ds.records.push_back(std::move(r));
    }
  }
  if (ds.records.empty()) throw SchemaViolation("", "dataset at " + path.string() + " has no records");
  return ds;
}

nlohmann::json manifest_json(const std::vector<DatasetRecord>& records, Split split, const LabelRanges& ranges,
                             const fs::path& base_dir) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json sentence = nlohmann::json::object();
    for (std::size_t i = 0; i < kSentenceLabelDims; ++i) sentence[kSentenceLabelNames[i]] = label_json(r.sentence_labels[i]);
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : r.word_labels) {
      nlohmann::json entry = {{"word", w.word}};
      for (std::size_t i = 0; i < kWordOutputs; ++i) entry[kWordDimNames[i]] = label_json(w.scores[i]);
      words.push_back(std::move(entry));
    }
    const auto rel = r.audio_path.is_absolute() ? fs::relative(r.audio_path, base_dir) : r.audio_path;
    nlohmann::json rec = {{"utterance_id", r.utterance_id},
                          {"audio", rel.generic_string()},
                          {"target_text", r.target_text},
                          {"sentence_labels", std::move(sentence)},
                          {"word_labels", std::move(words)}};
    if (!r.speaker.empty()) rec["speaker"] = r.speaker;
    list.push_back(std::move(rec));
  }
  return {{"format", kManifestFormat},
          {"version", kManifestVersion},
          {"split", std::string(to_string(split))},
          {"label_ranges", ranges},
          {"records", std::move(list)}};
}

void write_manifest(const fs::path& path, const std::vector<DatasetRecord>& records, Split split,
                    const LabelRanges& ranges) {
  const std::string text = manifest_json(records, split, ranges, fs::absolute(path).parent_path()).dump(1) + "\n";
  binio::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::array<std::size_t, 2> convert_speechocean762(const fs::path& root, const fs::path& out_dir) {
  const auto scores = read_json_file(root / "resource" / "scores.json");
  std::array<std::size_t, 2> counts{};
  fs::create_directories(out_dir);
  for (const Split split : {Split::kTrain, Split::kTest}) {
    const fs::path dir = root / std::string(to_string(split));
    std::map<std::string, std::string> wav, speaker;
    auto read_pairs = [&](const fs::path& file, std::map<std::string, std::string>& into) {
      std::ifstream in(file);
      if (!in) throw SchemaViolation("", "cannot open " + file.string());
      std::string key, value;
      while (in >> key >> value) into[key] = value;
    };
    read_pairs(dir / "wav.scp", wav);
    if (fs::exists(dir / "utt2spk")) read_pairs(dir / "utt2spk", speaker);
    std::vector<DatasetRecord> records;
    for (const auto& [utt, rel] : wav) {
      if (!scores.contains(utt)) throw SchemaViolation(utt, "missing from resource/scores.json");
      const auto& s = scores.at(utt);
      DatasetRecord r;
      r.utterance_id = utt;
      r.audio_path = fs::absolute(root / rel);
      r.target_text = s.at("text").get<std::string>();
      r.target_words = normalize_words(r.target_text);
      r.speaker = speaker.count(utt) ? speaker[utt] : std::string();
      r.split = split;
      r.sentence_labels = {read_label(s, "accuracy", utt), read_label(s, "completeness", utt),
                           read_label(s, "fluency", utt), read_label(s, "prosodic", utt), read_label(s, "total", utt)};
      for (const auto& w : s.at("words")) {
        WordLabel wl;
        const auto norm = normalize_words(w.at("text").get<std::string>());
        wl.word = norm.empty() ? std::string() : norm.front();
        for (std::size_t i = 0; i < kWordOutputs; ++i) wl.scores[i] = read_label(w, kWordDimNames[i], utt);
        r.word_labels.push_back(std::move(wl));
      }
      records.push_back(std::move(r));
    }
    write_manifest(out_dir / (std::string(to_string(split)) + ".json"), records, split, LabelRanges{});
    counts[split == Split::kTrain ? 0 : 1] = records.size();
  }
  return counts;
}

LabelMinima label_minima(const std::vector<const DatasetRecord*>& records) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  LabelMinima m;
  m.sentence.fill(kInf);
  m.word.fill(kInf);
  for (const auto* r : records) {
    for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
      if (r->sentence_labels[i]) m.sentence[i] = std::min(m.sentence[i], *r->sentence_labels[i]);
    }
    for (const auto& w : r->word_labels) {
      for (std::size_t i = 0; i < kWordOutputs; ++i) {
        if (w.scores[i]) m.word[i] = std::min(m.word[i], *w.scores[i]);
      }
    }
  }
  for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
    if (m.sentence[i] == kInf) throw DegenerateInput(std::string("no training labels for sentence ") + kSentenceLabelNames[i]);
  }
  for (std::size_t i = 0; i < kWordOutputs; ++i) {
    if (m.word[i] == kInf) throw DegenerateInput(std::string("no training labels for word ") + kWordDimNames[i]);
  }
  return m;
}

void to_json(nlohmann::json& j, const LabelMinima& m) {
  j = nlohmann::json::object();
  for (std::size_t i = 0; i < kSentenceLabelDims; ++i) j["sentence"][kSentenceLabelNames[i]] = m.sentence[i];
  for (std::size_t i = 0; i < kWordOutputs; ++i) j["word"][kWordDimNames[i]] = m.word[i];
}

void from_json(const nlohmann::json& j, LabelMinima& m) {
  for (std::size_t i = 0; i < kSentenceLabelDims; ++i) m.sentence[i] = j.at("sentence").at(kSentenceLabelNames[i]).get<double>();
  for (std::size_t i = 0; i < kWordOutputs; ++i) m.word[i] = j.at("word").at(kWordDimNames[i]).get<double>();
}

}  // namespace multipa
