// multipa: command-line front end for training, evaluation, single-clip
// assessment, the completeness threshold study, the ASR ablation, corpus
// utilities and the HTTP service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "CLI11.hpp"
#include "multipa/aligned_io.hpp"
#include "multipa/audio.hpp"
#include "multipa/binary_io.hpp"
#include "multipa/completeness.hpp"
#include "multipa/dataset.hpp"
#include "multipa/errors.hpp"
#include "multipa/evaluation.hpp"
#include "multipa/pipeline.hpp"
#include "multipa/service.hpp"
#include "multipa/synthetic.hpp"
#include "multipa/text.hpp"

namespace fs = std::filesystem;
using namespace multipa;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  binio::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

struct CommonOptions {
  std::string config_path;
  std::string dataset;
  std::string checkpoint;
  std::string cache;

  void add(CLI::App* app, bool dataset_opt, bool checkpoint_opt) {
    app->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    if (dataset_opt) app->add_option("-d,--dataset", dataset, "Dataset directory or manifest (overrides config)");
    if (checkpoint_opt) app->add_option("-k,--checkpoint", checkpoint, "Checkpoint path (overrides config)");
    app->add_option("--cache", cache, "Client output cache directory (overrides config)");
  }

  AppConfig load() const {
    AppConfig c = load_app_config(config_path);
    if (!dataset.empty()) c.dataset_path = dataset;
    if (!checkpoint.empty()) c.checkpoint_path = checkpoint;
    if (!cache.empty()) c.cache_path = cache;
    c.validate();
    return c;
  }
};

std::vector<Mode> parse_modes(const std::string& which) {
  if (which == "both") return {Mode::kClosed, Mode::kOpen};
  return {mode_from_string(which)};
}

nlohmann::json simulation_json(const SimulationReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (std::size_t i = 0; i < r.threshold_grid.size(); ++i) {
    curve.push_back({{"threshold", r.threshold_grid[i]}, {"f1", r.f1_per_threshold[i]}});
  }
  return {{"best_threshold", r.best_threshold},
          {"best_f1", r.best_f1},
          {"complete_words", r.complete_durations.size()},
          {"incomplete_words", r.incomplete_durations.size()},
          {"skipped_utterances", r.skipped_utterances},
          {"f1_curve", std::move(curve)}};
}

std::shared_ptr<const Assessor> make_assessor(const AppConfig& config) {
  auto model = std::make_shared<const TrainedModel>(load_checkpoint(config.checkpoint_path));
  auto clients = std::make_shared<const ModelClients>(config.effective_clients());
  auto extractor = std::make_shared<const FeatureExtractor>(clients, config.use_perceived_features);
  return std::make_shared<const Assessor>(model, extractor, config.completeness);
}

AssessmentService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multipa - multi-task pronunciation assessment"};
  app.require_subcommand(1);

  // ---- train
  CommonOptions train_opts;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  std::string train_log;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the train split and write a checkpoint");
  train_opts.add(train_cmd, true, true);
  train_cmd->add_option("--seed", train_seed, "Training seed (overrides config)");
  train_cmd->add_option("--epochs", train_epochs, "Maximum epochs (overrides config)");
  train_cmd->add_option("--log", train_log, "Training log JSON (default: <checkpoint>.log.json)");

  // ---- evaluate
  CommonOptions eval_opts;
  std::string eval_mode = "both";
  std::size_t eval_seeds = 5;
  std::string eval_out = "reports";
  auto* eval_cmd = app.add_subcommand("evaluate", "Train per seed and evaluate, or evaluate a checkpoint");
  eval_opts.add(eval_cmd, true, true);
  eval_cmd->add_option("--mode", eval_mode, "closed, open or both")->check(CLI::IsMember({"closed", "open", "both"}));
  eval_cmd->add_option("--seeds", eval_seeds, "Number of training seeds (ignored with --checkpoint)")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("-o,--out", eval_out, "Output directory for report_<mode>.json and table.txt");

  // ---- assess
  CommonOptions assess_opts;
  std::string assess_audio, assess_mode = "closed";
  std::optional<std::string> assess_text;
  auto* assess_cmd = app.add_subcommand("assess", "Score one recording with a trained checkpoint");
  assess_opts.add(assess_cmd, false, true);
  assess_cmd->add_option("-a,--audio", assess_audio, "WAV file")->required()->check(CLI::ExistingFile);
  assess_cmd->add_option("--mode", assess_mode, "closed or open")->check(CLI::IsMember({"closed", "open"}));
  assess_cmd->add_option("-t,--text", assess_text, "Target text (closed mode)");

  // ---- completeness-analysis
  CommonOptions comp_opts;
  bool comp_synthetic = false;
  std::size_t comp_subset = 200;
  std::uint64_t comp_seed = 1;
  std::string comp_out = "completeness";
  auto* comp_cmd = app.add_subcommand("completeness-analysis", "Study the completeness duration threshold");
  comp_opts.add(comp_cmd, true, false);
  comp_cmd->add_flag("--synthetic", comp_synthetic, "Use the two-population duration sampler (no models needed)");
  comp_cmd->add_option("--subset", comp_subset, "Number of train utterances to augment")->check(CLI::PositiveNumber);
  comp_cmd->add_option("--seed", comp_seed, "Sampling / insertion seed");
  comp_cmd->add_option("-o,--out", comp_out, "Output directory for report.json, histogram.svg, f1.svg");

  // ---- ablation
  CommonOptions abl_opts;
  std::vector<std::string> abl_asrt = {"medium.en", "small.en", "base.en"};
  bool abl_no_asrp = false;
  std::size_t abl_seeds = 5;
  std::string abl_out = "ablation";
  auto* abl_cmd = app.add_subcommand("ablation", "Compare ASRt models in open-response scoring");
  abl_opts.add(abl_cmd, true, false);
  abl_cmd->add_option("--asrt", abl_asrt, "ASRt model ids")->delimiter(',');
  abl_cmd->add_flag("--no-asrp", abl_no_asrp, "Add a configuration without perceived (ASRp) features");
  abl_cmd->add_option("--seeds", abl_seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
  abl_cmd->add_option("-o,--out", abl_out, "Output directory");

  // ---- dump-features
  CommonOptions dump_opts;
  std::string dump_audio, dump_mode = "closed";
  std::optional<std::string> dump_text;
  auto* dump_cmd = app.add_subcommand("dump-features", "Print transcripts, alignments and features of one clip");
  dump_opts.add(dump_cmd, false, false);
  dump_cmd->add_option("-a,--audio", dump_audio, "WAV file")->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--mode", dump_mode, "closed or open")->check(CLI::IsMember({"closed", "open"}));
  dump_cmd->add_option("-t,--text", dump_text, "Target text (closed mode)");

  // ---- serve
  CommonOptions serve_opts;
  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP assessment API");
  serve_opts.add(serve_cmd, false, true);
  serve_cmd->add_option("--host", serve_host, "Bind address (overrides config)");
  serve_cmd->add_option("--port", serve_port, "Port (overrides config)");

  // ---- synth-corpus
  SyntheticCorpusOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "Generate a labelled synthetic tone-speech corpus");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--train", synth.train_utterances, "Train utterances");
  synth_cmd->add_option("--test", synth.test_utterances, "Test utterances");
  synth_cmd->add_option("--speakers", synth.speakers, "Speakers");
  synth_cmd->add_option("--min-words", synth.min_words, "Minimum words per sentence");
  synth_cmd->add_option("--max-words", synth.max_words, "Maximum words per sentence");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  // ---- convert-speechocean
  std::string so_root, so_out;
  auto* so_cmd = app.add_subcommand("convert-speechocean", "Convert a speechocean762 release to manifests");
  so_cmd->add_option("--corpus", so_root, "speechocean762 root")->required()->check(CLI::ExistingDirectory);
  so_cmd->add_option("-o,--out", so_out, "Output directory for train.json/test.json")->required();

  // ---- print-config
  CommonOptions pc_opts;
  auto* pc_cmd = app.add_subcommand("print-config", "Print the effective configuration");
  pc_opts.add(pc_cmd, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      AppConfig config = train_opts.load();
      if (train_seed) config.training.seed = *train_seed;
      if (train_epochs) config.training.max_epochs = *train_epochs;
      config.training.validate();
      if (config.checkpoint_path.empty()) throw ConfigError("no checkpoint path given");
      config.require_paths(true, false);
      const Dataset dataset = load_dataset(config.dataset_path);
      auto clients = std::make_shared<const ModelClients>(config.effective_clients());
      const FeatureExtractor extractor(clients, config.use_perceived_features);
      std::vector<std::string> skipped;
      const auto examples =
          extract_training_examples(extractor, dataset.split(Split::kTrain), dataset.ranges, &skipped);
      std::cerr << "extracted " << examples.size() << " training utterances, skipped " << skipped.size() << "\n";
      auto result = train(examples, config.training, config.model, dataset.ranges);
      for (const auto& e : result.log.epochs) {
        std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss;
        if (e.validation_loss) std::cout << " validation_loss " << *e.validation_loss;
        std::cout << "\n";
      }
      save_checkpoint(config.checkpoint_path, result.trained);
      const fs::path log_path = train_log.empty() ? fs::path(config.checkpoint_path.string() + ".log.json") : fs::path(train_log);
      write_json(log_path, {{"config", config}, {"log", result.log}, {"skipped", skipped}});
      std::cout << "checkpoint written to " << config.checkpoint_path.string() << " (best epoch "
                << result.log.best_epoch << ")\n";
      return 0;
    }

    if (*eval_cmd) {
      const AppConfig config = eval_opts.load();
      config.require_paths(true, !eval_opts.checkpoint.empty());
      const Dataset dataset = load_dataset(config.dataset_path);
      const auto modes = parse_modes(eval_mode);
      std::vector<EvalReport> reports;
      if (!eval_opts.checkpoint.empty()) {
        const auto assessor = make_assessor(config);
        const auto minima = label_minima(dataset.split(Split::kTrain));
        const auto test = dataset.split(Split::kTest);
        for (Mode m : modes) {
          auto f = m == Mode::kClosed ? evaluate_closed(*assessor, test, minima) : evaluate_open(*assessor, test, minima);
          reports.push_back(aggregate({f}, {config.training.seed}, minima));
        }
      } else {
        reports = run_experiment(config, dataset, modes, eval_seeds, "MultiPA", &std::cerr).reports;
      }
      for (const auto& r : reports) write_json(fs::path(eval_out) / ("report_" + std::string(to_string(r.mode)) + ".json"), r);
      const std::string table = render_table(reports);
      write_text(fs::path(eval_out) / "table.txt", table);
      std::cout << table;
      return 0;
    }

    if (*assess_cmd) {
      const AppConfig config = assess_opts.load();
      config.require_paths(false, true);
      const auto assessor = make_assessor(config);
      const auto result = assessor->assess_audio(read_wav(assess_audio), mode_from_string(assess_mode), assess_text,
                                                 fs::path(assess_audio).stem().string());
      std::cout << to_json(result).dump(2) << "\n";
      return 0;
    }

    if (*comp_cmd) {
      const AppConfig config = comp_opts.load();
      std::vector<double> complete, incomplete;
      std::size_t skipped = 0;
      if (comp_synthetic) {
        sample_duration_populations(DurationPopulations{}, comp_seed, complete, incomplete);
      } else {
        config.require_paths(true, false);
        const Dataset dataset = load_dataset(config.dataset_path);
        auto records = dataset.split(Split::kTrain);
        std::mt19937_64 rng(comp_seed);
        std::shuffle(records.begin(), records.end(), rng);
        if (records.size() > comp_subset) records.resize(comp_subset);
        std::set<std::string> vocab;
        for (const auto& r : dataset.records) vocab.insert(r.target_words.begin(), r.target_words.end());
        std::vector<SimulationInput> subset;
        for (const auto* r : records) subset.push_back({r->utterance_id, r->target_words, load_record_audio(*r)});
        const ModelClients clients(config.effective_clients());
        const auto sim = simulate_incomplete_corpus(
            subset, {vocab.begin(), vocab.end()},
            [&](const RawTranscript& t, const AudioClip& a) { return clients.force_align(t, a); }, comp_seed);
        collect_durations(sim, complete, incomplete);
        skipped = sim.skipped;
      }
      SimulationReport report = sweep_thresholds(complete, incomplete);
      report.skipped_utterances = skipped;
      write_json(fs::path(comp_out) / "report.json", simulation_json(report));
      write_text(fs::path(comp_out) / "histogram.svg", render_histogram_svg(report));
      write_text(fs::path(comp_out) / "f1.svg", render_f1_svg(report));
      std::cout << "best threshold " << report.best_threshold << " s, F1 " << report.best_f1 << " ("
                << complete.size() << " complete / " << incomplete.size() << " incomplete words, " << skipped
                << " utterances skipped)\n";
      return 0;
    }

    if (*abl_cmd) {
      const AppConfig config = abl_opts.load();
      config.require_paths(true, false);
      const Dataset dataset = load_dataset(config.dataset_path);
      const auto reports = run_ablation(asrt_ablation_configs(config, abl_asrt, abl_no_asrp), dataset, abl_seeds, &std::cerr);
      nlohmann::json all = nlohmann::json::array();
      for (const auto& r : reports) all.push_back(r);
      write_json(fs::path(abl_out) / "ablation.json", all);
      const std::string table = render_table(reports);
      write_text(fs::path(abl_out) / "table.txt", table);
      std::cout << table;
      return 0;
    }

    if (*dump_cmd) {
      const AppConfig config = dump_opts.load();
      auto clients = std::make_shared<const ModelClients>(config.effective_clients());
      const FeatureExtractor extractor(clients, config.use_perceived_features);
      std::optional<RawTranscript> target;
      if (dump_text) target = make_transcript(*dump_text, TranscriptSource::kTarget);
      const auto e = extractor.extract(canonicalize(read_wav(dump_audio)), mode_from_string(dump_mode), target,
                                       fs::path(dump_audio).stem().string());
      auto matrix_json = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          std::vector<double> row(m.cols());
          for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
          rows.push_back(row);
        }
        return rows;
      };
      std::cout << nlohmann::json{{"target_transcript", e.target.text()},
                                  {"perceived_transcript", e.perceived.text()},
                                  {"target_alignment", aligned_to_json(e.features.target)},
                                  {"word_features", matrix_json(e.features.bundle.word_feature_matrix())},
                                  {"phone_features", matrix_json(e.features.bundle.phone_feature_matrix())},
                                  {"phone_to_word", e.features.bundle.phone_to_word},
                                  {"acoustic_frames", e.features.frames.size()}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*serve_cmd) {
      AppConfig config = serve_opts.load();
      if (serve_host) config.host = *serve_host;
      if (serve_port) config.port = *serve_port;
      config.validate();
      config.require_paths(false, true);
      AssessmentService service([config] { return make_assessor(config); });
      service.start_loading();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << config.host << ":" << config.port << "\n";
      service.serve(config.host, config.port);
      g_service = nullptr;
      return 0;
    }

    if (*synth_cmd) {
      write_synthetic_corpus(synth_out, synth);
      std::cout << "wrote " << synth.train_utterances << " train and " << synth.test_utterances
                << " test utterances to " << synth_out << "\n";
      return 0;
    }

    if (*so_cmd) {
      const auto counts = convert_speechocean762(so_root, so_out);
      std::cout << "wrote " << counts[0] << " train and " << counts[1] << " test records to " << so_out << "\n";
      return 0;
    }

    if (*pc_cmd) {
      std::cout << nlohmann::json(pc_opts.load()).dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaViolation& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
