#include "multipa/model.hpp"

#include <algorithm>
#include <cmath>

#include "multipa/binary_io.hpp"
#include "multipa/errors.hpp"

namespace multipa {

namespace {

constexpr std::string_view kCheckpointMagic = "MPACKPT1";

// Mean of the listed rows of m, accumulated in list order.
Eigen::MatrixXd grouped_row_means(const Eigen::MatrixXd& m, const std::vector<std::vector<std::size_t>>& groups) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()), m.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) continue;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t r : groups[g]) acc += m(static_cast<Eigen::Index>(r), c);
      out(static_cast<Eigen::Index>(g), c) = acc / static_cast<double>(groups[g].size());
    }
  }
  return out;
}

template <std::size_t N>
void range_json(nlohmann::json& j, const std::array<std::array<double, 2>, N>& ranges,
                const std::array<const char*, N>& names) {
  for (std::size_t i = 0; i < N; ++i) j[names[i]] = {ranges[i][0], ranges[i][1]};
}

template <std::size_t N>
void range_from_json(const nlohmann::json& j, std::array<std::array<double, 2>, N>& ranges,
                     const std::array<const char*, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (j.contains(names[i])) ranges[i] = j.at(names[i]).template get<std::array<double, 2>>();
  }
}

nlohmann::json normalizer_json(const FeatureNormalizer& n) {
  return {{"word_mean", n.word_mean}, {"word_std", n.word_std}, {"phone_mean", n.phone_mean}, {"phone_std", n.phone_std}};
}

FeatureNormalizer normalizer_from_json(const nlohmann::json& j) {
  FeatureNormalizer n;
  n.word_mean = j.at("word_mean").get<decltype(n.word_mean)>();
  n.word_std = j.at("word_std").get<decltype(n.word_std)>();
  n.phone_mean = j.at("phone_mean").get<decltype(n.phone_mean)>();
  n.phone_std = j.at("phone_std").get<decltype(n.phone_std)>();
  return n;
}

}  // namespace

void ModelConfig::validate() const {
  if (d <= 0 || k <= 0 || h <= 0 || n_fusion_layers <= 0 || ffn_dim <= 0 || backbone_dim <= 0 ||
      backbone_layers < 0 || backbone_heads <= 0 || max_words <= 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (d % h != 0) throw ConfigError("d (" + std::to_string(d) + ") must be divisible by h (" + std::to_string(h) + ")");
  if (backbone_dim % backbone_heads != 0) throw ConfigError("backbone_dim must be divisible by backbone_heads");
  if (k % 2 == 0) throw ConfigError("word-head kernel size k must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"d", c.d},
       {"k", c.k},
       {"h", c.h},
       {"n_fusion_layers", c.n_fusion_layers},
       {"dropout", c.dropout},
       {"ffn_dim", c.ffn_dim},
       {"backbone_dim", c.backbone_dim},
       {"backbone_layers", c.backbone_layers},
       {"backbone_heads", c.backbone_heads},
       {"max_words", c.max_words},
       {"freeze_feature_extractor", c.freeze_feature_extractor}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "d") c.d = v.get<int>();
      else if (key == "k") c.k = v.get<int>();
      else if (key == "h") c.h = v.get<int>();
      else if (key == "n_fusion_layers") c.n_fusion_layers = v.get<int>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "ffn_dim") c.ffn_dim = v.get<int>();
      else if (key == "backbone_dim") c.backbone_dim = v.get<int>();
      else if (key == "backbone_layers") c.backbone_layers = v.get<int>();
      else if (key == "backbone_heads") c.backbone_heads = v.get<int>();
      else if (key == "max_words") c.max_words = v.get<int>();
      else if (key == "freeze_feature_extractor") c.freeze_feature_extractor = v.get<bool>();
      else throw ConfigError("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("model config key '" + key + "' has the wrong type");
    }
  }
}

int InputDims::static_width() const {
  return static_cast<int>(WordFeatureVector::kWidth + PhoneFeatureVector::kWidth) + 2 * inventory_size +
         2 * embedding_dim;
}

void to_json(nlohmann::json& j, const InputDims& d) {
  j = {{"embedding_dim", d.embedding_dim}, {"acoustic_dim", d.acoustic_dim}, {"inventory_size", d.inventory_size}};
}

void from_json(const nlohmann::json& j, InputDims& d) {
  d.embedding_dim = j.at("embedding_dim").get<int>();
  d.acoustic_dim = j.at("acoustic_dim").get<int>();
  d.inventory_size = j.at("inventory_size").get<int>();
}

void LabelRanges::validate() const {
  auto check = [](const std::array<double, 2>& r) {
    if (!(r[1] > r[0])) throw ConfigError("label range upper bound must exceed the lower bound");
  };
  for (const auto& r : sentence) check(r);
  for (const auto& r : word) check(r);
  check(completeness);
}

void to_json(nlohmann::json& j, const LabelRanges& r) {
  j = nlohmann::json::object();
  nlohmann::json s, w;
  range_json(s, r.sentence, kSentenceDimNames);
  range_json(w, r.word, kWordDimNames);
  j["sentence"] = s;
  j["word"] = w;
  j["completeness"] = r.completeness;
}

void from_json(const nlohmann::json& j, LabelRanges& r) {
  try {
    if (j.contains("sentence")) range_from_json(j.at("sentence"), r.sentence, kSentenceDimNames);
    if (j.contains("word")) range_from_json(j.at("word"), r.word, kWordDimNames);
    if (j.contains("completeness")) r.completeness = j.at("completeness").get<std::array<double, 2>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed label ranges: ") + e.what());
  }
  r.validate();
}

double SentenceScores::at(std::size_t i) const {
  switch (i) {
    case 0: return accuracy;
    case 1: return fluency;
    case 2: return prosody;
    case 3: return total;
  }
  throw PreconditionError("sentence dimension out of range");
}

double& SentenceScores::at(std::size_t i) {
  switch (i) {
    case 0: return accuracy;
    case 1: return fluency;
    case 2: return prosody;
    case 3: return total;
  }
  throw PreconditionError("sentence dimension out of range");
}

double WordScores::at(std::size_t i) const {
  switch (i) {
    case 0: return accuracy;
    case 1: return stress;
    case 2: return total;
  }
  throw PreconditionError("word dimension out of range");
}

double& WordScores::at(std::size_t i) {
  switch (i) {
    case 0: return accuracy;
    case 1: return stress;
    case 2: return total;
  }
  throw PreconditionError("word dimension out of range");
}

nlohmann::json to_json(const ScoreOutput& s) {
  nlohmann::json sentence = nlohmann::json::object();
  for (std::size_t i = 0; i < kSentenceOutputs; ++i) sentence[kSentenceDimNames[i]] = s.sentence.at(i);
  if (s.completeness) sentence["completeness"] = *s.completeness;
  nlohmann::json words = nlohmann::json::array();
  for (std::size_t w = 0; w < s.word.size(); ++w) {
    nlohmann::json entry = {{"word", w < s.words.size() ? s.words[w] : std::string()}};
    for (std::size_t i = 0; i < kWordOutputs; ++i) entry[kWordDimNames[i]] = s.word[w].at(i);
    words.push_back(std::move(entry));
  }
  return {{"sentence", std::move(sentence)}, {"words", std::move(words)}};
}

std::vector<std::vector<std::size_t>> word_frame_groups(const AlignedTranscript& target, std::size_t frame_count,
                                                        double frame_hop) {
  if (frame_count == 0) throw PreconditionError("no acoustic frames to pool");
  if (!(frame_hop > 0.0)) throw PreconditionError("frame hop must be positive");
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(target.words.size());
  for (const auto& w : target.words) {
    std::vector<std::size_t> g;
    for (std::size_t f = 0; f < frame_count; ++f) {
      const double centre = (static_cast<double>(f) + 0.5) * frame_hop;
      if (centre >= w.start && centre < w.end) g.push_back(f);
    }
    if (g.empty()) {
      const double mid = 0.5 * (w.start + w.end);
      const double pos = std::floor(mid / frame_hop);
      g.push_back(static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(frame_count - 1))));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

PooledLevels pool_levels(const FeatureBundle& bundle, const AcousticFrameSeq& frames, const AlignedTranscript& target,
                         const FeatureNormalizer& normalizer) {
  const std::size_t w_count = bundle.word_count();
  if (target.words.size() != w_count) throw PreconditionError("pool_levels: bundle and target word counts differ");
  if (bundle.phone_to_word.size() != bundle.phone_count() ||
      static_cast<std::size_t>(bundle.phone_posteriors.rows()) != bundle.phone_count()) {
    throw PreconditionError("pool_levels: phone tables disagree in length");
  }
  std::vector<std::vector<std::size_t>> phones_of(w_count);
  for (std::size_t p = 0; p < bundle.phone_to_word.size(); ++p) {
    if (bundle.phone_to_word[p] >= w_count) throw PreconditionError("pool_levels: phone owned by a missing word");
    phones_of[bundle.phone_to_word[p]].push_back(p);
  }
  PooledLevels out;
  out.frame_groups = word_frame_groups(target, frames.size(), frames.frame_hop);
  const Eigen::MatrixXd word_feats = normalizer.normalize_words(bundle.word_feature_matrix());
  const Eigen::MatrixXd phone_feats = grouped_row_means(normalizer.normalize_phones(bundle.phone_feature_matrix()), phones_of);
  const Eigen::MatrixXd posteriors = grouped_row_means(bundle.phone_posteriors, phones_of);
  const Eigen::MatrixXd acoustic = grouped_row_means(frames.frames, out.frame_groups);

  const std::vector<const Eigen::MatrixXd*> parts = {&word_feats,  &bundle.phone_vectors, &bundle.word_embed_pairs,
                                                     &phone_feats, &posteriors,           &acoustic};
  Eigen::Index cols = 0;
  for (const auto* p : parts) {
    if (static_cast<std::size_t>(p->rows()) != w_count) throw PreconditionError("pool_levels: row count mismatch");
    cols += p->cols();
  }
  out.words.resize(static_cast<Eigen::Index>(w_count), cols);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.words.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

ModelInput make_model_input(const FeatureBundle& bundle, const AcousticFrameSeq& frames,
                            const AlignedTranscript& target, const FeatureNormalizer& normalizer) {
  auto pooled = pool_levels(bundle, frames, target, normalizer);
  ModelInput in;
  in.word_static = pooled.words.leftCols(pooled.words.cols() - frames.frames.cols());
  in.frames = frames.frames;
  in.frame_groups = std::move(pooled.frame_groups);
  for (const auto& w : target.words) in.words.push_back(w.text);
  return in;
}

MultiPAModel::MultiPAModel(ModelConfig config, InputDims dims, std::uint64_t seed)
    : config_(config), dims_(dims) {
  config_.validate();
  if (dims_.embedding_dim <= 0 || dims_.acoustic_dim <= 0 || dims_.inventory_size <= 0) {
    throw ConfigError("input dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  const int c = config_.backbone_dim;
  feature_projection_ = nn::Linear(store_, "backbone.feature_projection", dims_.acoustic_dim, c, rng);
  for (int l = 0; l < config_.backbone_layers; ++l) {
    backbone_.emplace_back(store_, "backbone.encoder." + std::to_string(l), c, config_.backbone_heads, 4 * c,
                           config_.dropout, rng);
  }
  input_projection_ = nn::Linear(store_, "fusion.input_projection", dims_.static_width() + c, config_.d, rng);
  positions_ = store_.normal("fusion.positions", config_.max_words, config_.d, 0.02, rng);
  for (int l = 0; l < config_.n_fusion_layers; ++l) {
    fusion_.emplace_back(store_, "fusion.encoder." + std::to_string(l), config_.d, config_.h, config_.ffn_dim,
                         config_.dropout, rng);
  }
  sentence_head_ = nn::Linear(store_, "heads.sentence", config_.d, kSentenceOutputs, rng);
  word_head_ = nn::Conv1dSame(store_, "heads.word", config_.d, kWordOutputs, config_.k, rng);
  if (config_.freeze_feature_extractor) store_.set_trainable("backbone.feature_projection", false);
}

MultiPAModel::Outputs MultiPAModel::forward(const ModelInput& input, bool training, std::mt19937_64& rng) const {
  const auto words = input.word_static.rows();
  if (words == 0) throw PreconditionError("cannot score an utterance without words");
  if (words > config_.max_words) {
    throw PreconditionError("utterance has " + std::to_string(words) + " words; the model supports at most " +
                            std::to_string(config_.max_words));
  }
  if (input.word_static.cols() != dims_.static_width() || input.frames.cols() != dims_.acoustic_dim) {
    throw PreconditionError("model input widths do not match the model");
  }
  if (static_cast<Eigen::Index>(input.frame_groups.size()) != words) {
    throw PreconditionError("frame groups do not match the word count");
  }
  auto acoustic = ag::gelu(feature_projection_(ag::constant(input.frames)));
  for (const auto& layer : backbone_) acoustic = layer(acoustic, rng, training);
  const auto pooled = ag::segment_mean(acoustic, input.frame_groups);

  auto x = input_projection_(ag::concat_cols({ag::constant(input.word_static), pooled}));
  x = ag::add(x, ag::slice_rows(positions_, 0, words));
  x = ag::dropout(x, config_.dropout, rng, training);
  for (const auto& layer : fusion_) x = layer(x, rng, training);
  return {sentence_head_(ag::mean_rows(x)), word_head_(x)};
}

ScoreOutput MultiPAModel::predict(const ModelInput& input, const LabelRanges& ranges) const {
  std::mt19937_64 unused(0);
  const auto out = forward(input, false, unused);
  auto denorm = [](double v, const std::array<double, 2>& r) { return r[0] + std::clamp(v, 0.0, 1.0) * (r[1] - r[0]); };
  ScoreOutput s;
  for (std::size_t i = 0; i < kSentenceOutputs; ++i) {
    s.sentence.at(i) = denorm(out.sentence->value(0, static_cast<Eigen::Index>(i)), ranges.sentence[i]);
  }
  s.word.resize(static_cast<std::size_t>(out.word->rows()));
  for (std::size_t w = 0; w < s.word.size(); ++w) {
    for (std::size_t i = 0; i < kWordOutputs; ++i) {
      s.word[w].at(i) = denorm(out.word->value(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(i)), ranges.word[i]);
    }
  }
  s.words = input.words;
  return s;
}

ag::Var multitask_loss(const MultiPAModel::Outputs& outputs, const ScoreTargets& targets) {
  return ag::add(ag::masked_column_mse(outputs.sentence, targets.sentence, targets.sentence_mask),
                 ag::masked_column_mse(outputs.word, targets.word, targets.word_mask));
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& trained) {
  if (!trained.model) throw CheckpointError("no model to save");
  const auto& store = trained.model->parameters();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& [name, v] : store.entries()) shapes.push_back({name, v->rows(), v->cols()});
  const nlohmann::json header = {{"model_config", trained.model->config()},
                                 {"input_dims", trained.model->dims()},
                                 {"normalizer", normalizer_json(trained.normalizer)},
                                 {"label_ranges", trained.ranges},
                                 {"parameters", shapes}};
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kCheckpointMagic.data(), kCheckpointMagic.size());
  binio::put<std::uint32_t>(out, kCheckpointVersion);
  binio::put_string(out, header.dump());
  for (const auto& [_, v] : store.entries()) binio::put_matrix(out, v->value);
  binio::write_file_atomic(path, out);
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = binio::read_file(path);
  } catch (const PreconditionError& e) {
    throw CheckpointError(e.what());
  }
  try {
    binio::Reader r(bytes, "checkpoint");
    r.expect_magic(kCheckpointMagic);
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(v) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const auto header = nlohmann::json::parse(r.string());
    TrainedModel t;
    const auto config = header.at("model_config").get<ModelConfig>();
    const auto dims = header.at("input_dims").get<InputDims>();
    t.model = std::make_unique<MultiPAModel>(config, dims, 0);
    t.normalizer = normalizer_from_json(header.at("normalizer"));
    t.ranges = header.at("label_ranges").get<LabelRanges>();
    const auto& shapes = header.at("parameters");
    auto& entries = t.model->parameters().entries();
    if (shapes.size() != entries.size()) throw CheckpointError("checkpoint parameter count does not match the model");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [name, var] = entries[i];
      if (shapes[i].at(0).get<std::string>() != name) {
        throw CheckpointError("checkpoint parameter '" + shapes[i].at(0).get<std::string>() + "' where '" + name +
                              "' was expected");
      }
      Eigen::MatrixXd m = r.matrix();
      if (m.rows() != var->rows() || m.cols() != var->cols()) {
        throw CheckpointError("checkpoint parameter '" + name + "' has the wrong shape");
      }
      var->value = std::move(m);
    }
    r.expect_done();
    return t;
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }
}

}  // namespace multipa
