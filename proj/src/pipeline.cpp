#include "multipa/pipeline.hpp"

#include <fstream>
#include <ostream>

#include "multipa/audio.hpp"
#include "multipa/errors.hpp"
#include "multipa/features.hpp"
#include "multipa/text.hpp"

namespace multipa {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- AppConfig

void AppConfig::validate() const {
  effective_clients().validate();
  model.validate();
  training.validate();
  if (!(completeness.duration_threshold > 0.0)) throw ConfigError("completeness.duration_threshold must be positive");
  if (port < 0 || port > 65535) throw ConfigError("port must lie in [0, 65535]");
  if (host.empty()) throw ConfigError("host must not be empty");
}

void AppConfig::require_paths(bool dataset, bool checkpoint) const {
  if (dataset && (dataset_path.empty() || !fs::exists(dataset_path))) {
    throw ConfigError("dataset path does not exist: '" + dataset_path.string() + "'");
  }
  if (checkpoint && (checkpoint_path.empty() || !fs::is_regular_file(checkpoint_path))) {
    throw ConfigError("checkpoint does not exist: '" + checkpoint_path.string() + "'");
  }
  const auto lex = effective_clients().lexicon_path;
  if (!lex.empty() && !fs::is_regular_file(lex)) throw ConfigError("lexicon does not exist: '" + lex.string() + "'");
}

ClientConfig AppConfig::effective_clients() const {
  ClientConfig c = clients;
  if (!cache_path.empty()) c.cache_dir = cache_path;
  return c;
}

void to_json(nlohmann::json& j, const AppConfig& c) {
  j = {{"clients", c.clients},
       {"model", c.model},
       {"training", c.training},
       {"completeness", {{"duration_threshold", c.completeness.duration_threshold}}},
       {"use_perceived_features", c.use_perceived_features},
       {"dataset_path", c.dataset_path.string()},
       {"checkpoint_path", c.checkpoint_path.string()},
       {"cache_path", c.cache_path.string()},
       {"host", c.host},
       {"port", c.port}};
}

void from_json(const nlohmann::json& j, AppConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "clients") c.clients = v.get<ClientConfig>();
      else if (key == "model") c.model = v.get<ModelConfig>();
      else if (key == "training") c.training = v.get<TrainingConfig>();
      else if (key == "completeness") {
        for (const auto& [ck, cv] : v.items()) {
          if (ck != "duration_threshold") throw ConfigError("unknown completeness config key '" + ck + "'");
          c.completeness.duration_threshold = cv.get<double>();
        }
      } else if (key == "use_perceived_features") c.use_perceived_features = v.get<bool>();
      else if (key == "dataset_path") c.dataset_path = v.get<std::string>();
      else if (key == "checkpoint_path") c.checkpoint_path = v.get<std::string>();
      else if (key == "cache_path") c.cache_path = v.get<std::string>();
      else if (key == "host") c.host = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

AppConfig load_app_config(const fs::path& path) {
  AppConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    c = doc.get<AppConfig>();
    // Relative paths in a config file resolve against the file's directory.
    const auto base = fs::absolute(path).parent_path();
    for (fs::path* p : {&c.dataset_path, &c.checkpoint_path, &c.cache_path, &c.clients.cache_dir, &c.clients.lexicon_path}) {
      if (!p->empty() && p->is_relative()) *p = base / *p;
    }
  }
  apply_environment(c.clients);
  c.validate();
  return c;
}

// --------------------------------------------------------- FeatureExtractor

FeatureExtractor::FeatureExtractor(std::shared_ptr<const ModelClients> clients, bool use_perceived_features)
    : clients_(std::move(clients)), use_perceived_(use_perceived_features) {
  if (!clients_) throw PreconditionError("FeatureExtractor needs model clients");
}

Extraction FeatureExtractor::extract(const AudioClip& audio_in, Mode mode, const std::optional<RawTranscript>& target,
                                     const std::string& utterance_id, const std::string& speaker) const {
  if (mode == Mode::kClosed && !target) throw PreconditionError("closed mode requires a target text");
  if (mode == Mode::kOpen && target) throw PreconditionError("open mode does not accept a target text");
  if (target && target->empty()) throw PreconditionError("target text contains no words");
  AudioClip audio = audio_in;
  if (!utterance_id.empty()) audio.id = utterance_id;
  const std::string id = audio.id.empty() ? std::string("utterance") : audio.id;
  try {
    Extraction e;
    e.target = target ? *target : clients_->transcribe(audio, AsrTier::kTarget);
    const AlignedTranscript aligned_target = clients_->force_align(e.target, audio);
    const WordEmbeddingSeq target_emb = clients_->word_embeddings(e.target);

    AlignedTranscript aligned_perceived;
    aligned_perceived.utterance_id = audio.id;
    aligned_perceived.source = TranscriptSource::kAsrP;
    WordEmbeddingSeq perceived_emb;
    perceived_emb.vectors = Eigen::MatrixXd::Zero(0, target_emb.vectors.cols());
    e.perceived.source = TranscriptSource::kAsrP;
    if (use_perceived_) {
      e.perceived = clients_->transcribe(audio, AsrTier::kPerceived);
      aligned_perceived = clients_->force_align(e.perceived, audio);
      perceived_emb = clients_->word_embeddings(e.perceived);
    }
    e.features.utterance_id = audio.id;
    e.features.speaker = speaker;
    e.features.frames = clients_->acoustic_frames(audio);
    e.features.bundle =
        build_feature_bundle(aligned_target, aligned_perceived, target_emb, perceived_emb, clients_->inventory());
    e.features.target = aligned_target;
    return e;
  } catch (const EmptyTranscript& ex) {
    throw AssessmentUnavailable(id + ": " + ex.what());
  } catch (const AlignmentFailure& ex) {
    throw AssessmentUnavailable(id + ": " + ex.what());
  }
}

AudioClip load_record_audio(const DatasetRecord& record) {
  return canonicalize(read_wav(record.audio_path, record.utterance_id));
}

std::vector<TrainingExample> extract_training_examples(const FeatureExtractor& extractor,
                                                       const std::vector<const DatasetRecord*>& records,
                                                       const LabelRanges& ranges, std::vector<std::string>* skipped) {
  std::vector<TrainingExample> out;
  for (const DatasetRecord* r : records) {
    try {
      Extraction e = extractor.extract(load_record_audio(*r), Mode::kClosed,
                                       make_transcript(r->target_text, TranscriptSource::kTarget), r->utterance_id,
                                       r->speaker);
      TrainingExample ex;
      ex.targets = make_score_targets(*r, ranges, e.features.target.words.size());
      ex.features = std::move(e.features);
      out.push_back(std::move(ex));
    } catch (const AssessmentUnavailable&) {
      if (skipped) skipped->push_back(r->utterance_id);
    }
  }
  return out;
}

// ------------------------------------------------------------------ Assessor

Assessor::Assessor(std::shared_ptr<const TrainedModel> model, std::shared_ptr<const FeatureExtractor> extractor,
                   CompletenessConfig completeness, std::shared_ptr<Memo> memo)
    : model_(std::move(model)), extractor_(std::move(extractor)), completeness_(completeness), memo_(std::move(memo)) {
  if (!model_ || !model_->model) throw PreconditionError("Assessor needs a trained model");
  if (!extractor_) throw PreconditionError("Assessor needs a feature extractor");
  if (!(completeness_.duration_threshold > 0.0)) throw ConfigError("completeness threshold must be positive");
}

AssessmentResult Assessor::score(const Extraction& e, Mode mode) const {
  const MultiPAModel& net = *model_->model;
  const ModelInput input = make_model_input(e.features.bundle, e.features.frames, e.features.target, model_->normalizer);
  if (input.word_static.cols() != net.dims().static_width() ||
      static_cast<int>(e.features.frames.dim()) != net.dims().acoustic_dim) {
    throw ConfigError("extracted feature widths do not match the checkpoint (were the embedder or backbone models changed?)");
  }
  AssessmentResult r;
  r.mode = mode;
  r.scores = net.predict(input, model_->ranges);
  for (const auto& w : e.features.target.words) r.word_spans.push_back({w.start, w.end});
  r.target_transcript = e.target.text();
  r.perceived_transcript = e.perceived.text();
  if (mode == Mode::kClosed) {
    const double fraction = completeness_score(e.features.target, completeness_).score;
    const auto& range = model_->ranges.completeness;
    r.scores.completeness = range[0] + fraction * (range[1] - range[0]);
  }
  return r;
}

AssessmentResult Assessor::assess_audio(const AudioClip& audio, Mode mode, const std::optional<std::string>& target_text,
                                        const std::string& utterance_id) const {
  std::optional<RawTranscript> target;
  if (target_text) target = make_transcript(*target_text, TranscriptSource::kTarget);
  const Extraction e = extractor_->extract(canonicalize(audio), mode, target, utterance_id);
  return score(e, mode);
}

AssessmentResult Assessor::assess(const DatasetRecord& record, Mode mode) const {
  auto compute = [&] {
    std::optional<RawTranscript> target;
    if (mode == Mode::kClosed) target = make_transcript(record.target_text, TranscriptSource::kTarget);
    return extractor_->extract(load_record_audio(record), mode, target, record.utterance_id, record.speaker);
  };
  if (!memo_) return score(compute(), mode);

  const std::string key = std::string(to_string(mode)) + "|" + record.utterance_id;
  {
    std::lock_guard lock(memo_->mutex);
    const auto it = memo_->entries.find(key);
    if (it != memo_->entries.end()) {
      if (!it->second.extraction) throw AssessmentUnavailable(it->second.failure);
      return score(*it->second.extraction, mode);
    }
  }
  Memo::Entry entry;
  try {
    entry.extraction = std::make_shared<const Extraction>(compute());
  } catch (const AssessmentUnavailable& ex) {
    entry.failure = ex.what();
  }
  {
    std::lock_guard lock(memo_->mutex);
    memo_->entries.emplace(key, entry);
  }
  if (!entry.extraction) throw AssessmentUnavailable(entry.failure);
  return score(*entry.extraction, mode);
}

AlignedTranscript Assessor::align_truth(const DatasetRecord& record) const {
  auto compute = [&] {
    AudioClip audio = load_record_audio(record);
    return extractor_->clients().force_align(make_transcript(record.target_text, TranscriptSource::kTarget), audio);
  };
  if (!memo_) return compute();
  const std::string key = "truth|" + record.utterance_id;
  {
    std::lock_guard lock(memo_->mutex);
    const auto it = memo_->entries.find(key);
    if (it != memo_->entries.end()) {
      if (!it->second.truth) throw AlignmentFailure(it->second.failure);
      return *it->second.truth;
    }
  }
  Memo::Entry entry;
  try {
    entry.truth = compute();
  } catch (const AlignmentFailure& ex) {
    entry.failure = ex.what();
  }
  {
    std::lock_guard lock(memo_->mutex);
    memo_->entries.emplace(key, entry);
  }
  if (!entry.truth) throw AlignmentFailure(entry.failure);
  return *entry.truth;
}

// ---------------------------------------------------------------- Experiments

ExperimentResult run_experiment(const AppConfig& config, const Dataset& dataset, const std::vector<Mode>& modes,
                                std::size_t n_seeds, const std::string& label, std::ostream* log) {
  config.validate();
  if (modes.empty()) throw ConfigError("at least one evaluation mode is required");
  const auto train_records = dataset.split(Split::kTrain);
  const auto test_records = dataset.split(Split::kTest);
  if (train_records.empty()) throw DegenerateInput("dataset has no train split");
  if (test_records.empty()) throw DegenerateInput("dataset has no test split");

  ExperimentResult result;
  result.minima = label_minima(train_records);
  auto clients = std::make_shared<const ModelClients>(config.effective_clients());
  auto extractor = std::make_shared<const FeatureExtractor>(clients, config.use_perceived_features);
  const auto examples = extract_training_examples(*extractor, train_records, dataset.ranges, &result.skipped_training);
  if (log) {
    *log << "[" << label << "] extracted " << examples.size() << " training utterances ("
         << result.skipped_training.size() << " skipped)\n";
  }
  auto memo = std::make_shared<Assessor::Memo>();

  auto experiment = [&](std::uint64_t seed) {
    TrainingConfig tcfg = config.training;
    tcfg.seed = seed;
    auto trained = train(examples, tcfg, config.model, dataset.ranges);
    if (log) {
      for (const auto& e : trained.log.epochs) {
        *log << "[" << label << "] seed " << seed << " epoch " << e.epoch << " train_loss " << e.train_loss;
        if (e.validation_loss) *log << " validation_loss " << *e.validation_loss;
        *log << "\n";
      }
    }
    result.logs.push_back(trained.log);
    auto model = std::make_shared<const TrainedModel>(std::move(trained.trained));
    const Assessor assessor(model, extractor, config.completeness, memo);
    std::vector<EvalFragment> fragments;
    for (Mode m : modes) {
      fragments.push_back(m == Mode::kClosed ? evaluate_closed(assessor, test_records, result.minima)
                                             : evaluate_open(assessor, test_records, result.minima));
      if (log) {
        *log << "[" << label << "] seed " << seed << " " << to_string(m) << ": " << fragments.back().fallback_count
             << " fallback, " << fragments.back().excluded_words << " excluded words\n";
      }
    }
    return fragments;
  };
  result.reports = run_seeds(experiment, n_seeds, config.training.seed, result.minima, label);
  return result;
}

std::vector<AblationEntry> asrt_ablation_configs(const AppConfig& base, const std::vector<std::string>& asrt_ids,
                                                 bool include_no_asrp) {
  std::vector<AblationEntry> out;
  for (const auto& id : asrt_ids) {
    AblationEntry e{"ASRt=" + id, base};
    e.config.clients.asrt_model_id = id;
    // Using the ASRp model as ASRt is one of the compared settings.
    e.config.clients.allow_shared_asr = true;
    out.push_back(std::move(e));
  }
  if (include_no_asrp) {
    AblationEntry e{"no ASRp", base};
    e.config.use_perceived_features = false;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EvalReport> run_ablation(const std::vector<AblationEntry>& entries, const Dataset& dataset,
                                     std::size_t n_seeds, std::ostream* log) {
  std::vector<EvalReport> out;
  for (const auto& e : entries) {
    auto r = run_experiment(e.config, dataset, {Mode::kOpen}, n_seeds, e.label, log);
    out.push_back(std::move(r.reports.front()));
  }
  return out;
}

}  // namespace multipa
