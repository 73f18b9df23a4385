#include "multipa/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "multipa/errors.hpp"

namespace multipa {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"early_stop_patience", c.early_stop_patience},
       {"validation_fraction", c.validation_fraction},
       {"seed", c.seed},
       {"max_epochs", c.max_epochs}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  if (!j.is_object()) throw ConfigError("training config must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "batch_size") c.batch_size = v.get<int>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "momentum") c.momentum = v.get<double>();
    else if (key == "early_stop_patience") c.early_stop_patience = v.get<int>();
    else if (key == "validation_fraction") c.validation_fraction = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "max_epochs") c.max_epochs = v.get<int>();
    else throw ConfigError("unknown training config key '" + key + "'");
  }
  c.validate();
}

ScoreTargets make_score_targets(const DatasetRecord& record, const LabelRanges& ranges, std::size_t word_count) {
  if (!record.word_labels.empty() && record.word_labels.size() != word_count) {
    throw SchemaViolation(record.utterance_id, "word labels (" + std::to_string(record.word_labels.size()) +
                                                   ") do not match aligned word count (" + std::to_string(word_count) +
                                                   ")");
  }
  auto scale = [](double v, const std::array<double, 2>& r) { return (v - r[0]) / (r[1] - r[0]); };
  ScoreTargets t;
  t.sentence = Eigen::MatrixXd::Zero(1, kSentenceOutputs);
  t.sentence_mask = Eigen::MatrixXd::Zero(1, kSentenceOutputs);
  for (std::size_t i = 0; i < kSentenceOutputs; ++i) {
    const auto& label = record.sentence_labels[kSentenceOutputLabelIndex[i]];
    if (!label) continue;
    t.sentence(0, i) = scale(*label, ranges.sentence[i]);
    t.sentence_mask(0, i) = 1.0;
  }
  const auto w = static_cast<Eigen::Index>(word_count);
  t.word = Eigen::MatrixXd::Zero(w, kWordOutputs);
  t.word_mask = Eigen::MatrixXd::Zero(w, kWordOutputs);
  for (std::size_t r = 0; r < record.word_labels.size(); ++r) {
    for (std::size_t i = 0; i < kWordOutputs; ++i) {
      const auto& label = record.word_labels[r].scores[i];
      if (!label) continue;
      t.word(r, i) = scale(*label, ranges.word[i]);
      t.word_mask(r, i) = 1.0;
    }
  }
  return t;
}

std::vector<std::size_t> stratified_validation_split(const std::vector<std::string>& speakers, double fraction,
                                                     std::uint64_t seed) {
  const std::size_t n = speakers.size();
  if (fraction <= 0.0 || n < 2) return {};
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < n; ++i) by_speaker[speakers[i]].push_back(i);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(n);
  for (auto& [_, members] : by_speaker) {
    std::shuffle(members.begin(), members.end(), rng);
    const double offset = unit(rng);
    const double m = static_cast<double>(members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      keyed.emplace_back((static_cast<double>(r) + offset) / m, members[r]);
    }
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_val; ++i) out.push_back(keyed[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

void to_json(nlohmann::json& j, const TrainingLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    nlohmann::json entry = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    entry["validation_loss"] = e.validation_loss ? nlohmann::json(*e.validation_loss) : nlohmann::json(nullptr);
    epochs.push_back(std::move(entry));
  }
  j = {{"epochs", std::move(epochs)},
       {"best_epoch", log.best_epoch},
       {"early_stopped", log.early_stopped},
       {"validation_ids", log.validation_ids}};
}

double evaluation_loss(const MultiPAModel& model, const std::vector<ModelInput>& inputs,
                       const std::vector<const ScoreTargets*>& targets) {
  std::mt19937_64 unused(0);
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    total += multitask_loss(model.forward(inputs[i], false, unused), *targets[i])->value(0, 0);
  }
  return inputs.empty() ? 0.0 : total / static_cast<double>(inputs.size());
}

namespace {

std::vector<Eigen::MatrixXd> snapshot(const nn::ParameterStore& store) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& [_, p] : store.entries()) out.push_back(p->value);
  return out;
}

void restore(nn::ParameterStore& store, const std::vector<Eigen::MatrixXd>& values) {
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].second->value = values[i];
}

}  // namespace

TrainingResult train(const std::vector<TrainingExample>& examples, const TrainingConfig& config,
                     const ModelConfig& model_config, const LabelRanges& ranges) {
  config.validate();
  model_config.validate();
  ranges.validate();
  if (examples.empty()) throw DegenerateInput("no training examples");

  std::vector<std::string> speakers;
  for (const auto& e : examples) speakers.push_back(e.features.speaker);
  const auto validation = stratified_validation_split(speakers, config.validation_fraction, config.seed);
  std::vector<bool> is_val(examples.size(), false);
  for (auto i : validation) is_val[i] = true;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < examples.size(); ++i) (is_val[i] ? val_idx : train_idx).push_back(i);

  std::vector<FeatureBundle> fit_bundles;
  for (auto i : train_idx) fit_bundles.push_back(examples[i].features.bundle);
  TrainedModel trained;
  trained.normalizer = FeatureNormalizer::fit(fit_bundles);
  trained.ranges = ranges;

  const auto& first = examples.front().features;
  InputDims dims;
  dims.embedding_dim = static_cast<int>(first.bundle.word_embed_pairs.cols() / 2);
  dims.acoustic_dim = static_cast<int>(first.frames.dim());
  dims.inventory_size = static_cast<int>(first.bundle.phone_vectors.cols());

  std::vector<ModelInput> inputs;
  inputs.reserve(examples.size());
  for (const auto& e : examples) {
    inputs.push_back(make_model_input(e.features.bundle, e.features.frames, e.features.target, trained.normalizer));
    if (inputs.back().word_static.cols() != dims.static_width() ||
        static_cast<int>(e.features.frames.dim()) != dims.acoustic_dim) {
      throw SchemaViolation(e.features.utterance_id, "feature widths differ from the first training example");
    }
  }
  trained.model = std::make_unique<MultiPAModel>(model_config, dims, config.seed);
  MultiPAModel& model = *trained.model;

  std::vector<ModelInput> val_inputs;
  std::vector<const ScoreTargets*> val_targets;
  TrainingLog log;
  for (auto i : val_idx) {
    val_inputs.push_back(inputs[i]);
    val_targets.push_back(&examples[i].targets);
    log.validation_ids.push_back(examples[i].features.utterance_id);
  }

  nn::Sgd optimizer(config.learning_rate, config.momentum);
  std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + 17);
  std::optional<double> best_val;
  std::vector<Eigen::MatrixXd> best_weights;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      model.parameters().zero_grad();
      ag::Var batch_loss;
      for (std::size_t i = b; i < end; ++i) {
        const auto loss = multitask_loss(model.forward(inputs[order[i]], true, rng), examples[order[i]].targets);
        batch_loss = batch_loss ? ag::add(batch_loss, loss) : loss;
      }
      batch_loss = ag::scale(batch_loss, 1.0 / static_cast<double>(end - b));
      const double value = batch_loss->value(0, 0);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss " << value << " at epoch " << epoch << ", batch " << batches << " (";
        for (std::size_t i = b; i < end; ++i) msg << (i > b ? ", " : "") << examples[order[i]].features.utterance_id;
        msg << ")";
        throw NonFiniteLoss(msg.str());
      }
      ag::backward(batch_loss);
      optimizer.step(model.parameters());
      loss_sum += value;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    if (!val_inputs.empty()) {
      const double v = evaluation_loss(model, val_inputs, val_targets);
      if (!std::isfinite(v)) {
        throw NonFiniteLoss("non-finite validation loss at epoch " + std::to_string(epoch));
      }
      entry.validation_loss = v;
      if (!best_val || v < *best_val) {
        best_val = v;
        best_weights = snapshot(model.parameters());
        log.best_epoch = epoch;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
    } else {
      log.best_epoch = epoch;
    }
    log.epochs.push_back(entry);
    if (!val_inputs.empty() && bad_epochs >= config.early_stop_patience) {
      log.early_stopped = true;
      break;
    }
  }
  if (!best_weights.empty()) restore(model.parameters(), best_weights);
  return {std::move(trained), std::move(log)};
}

}  // namespace multipa
