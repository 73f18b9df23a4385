// Python extension: the core operations of the library. Structured results
// cross the boundary as JSON text and are decoded by the package wrapper.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "multipa/assessment.hpp"
#include "multipa/audio.hpp"
#include "multipa/completeness.hpp"
#include "multipa/dataset.hpp"
#include "multipa/edit_distance.hpp"
#include "multipa/errors.hpp"
#include "multipa/evaluation.hpp"
#include "multipa/metrics.hpp"
#include "multipa/pipeline.hpp"
#include "multipa/synthetic.hpp"

namespace py = pybind11;
using namespace multipa;

namespace {

AppConfig config_from_json(const std::string& text) {
  AppConfig c;
  if (!text.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    c = j.get<AppConfig>();
  }
  apply_environment(c.clients);
  c.validate();
  return c;
}

std::shared_ptr<const FeatureExtractor> make_extractor(const AppConfig& config) {
  auto clients = std::make_shared<const ModelClients>(config.effective_clients());
  return std::make_shared<const FeatureExtractor>(clients, config.use_perceived_features);
}

std::vector<Mode> modes_of(const std::string& which) {
  if (which == "both") return {Mode::kClosed, Mode::kOpen};
  return {mode_from_string(which)};
}

// Owns a loaded checkpoint and scores recordings with it.
class PyAssessor {
 public:
  explicit PyAssessor(const std::string& config_json) {
    const AppConfig config = config_from_json(config_json);
    config.require_paths(false, true);
    auto model = std::make_shared<const TrainedModel>(load_checkpoint(config.checkpoint_path));
    assessor_ = std::make_shared<const Assessor>(model, make_extractor(config), config.completeness);
  }

  std::string assess_file(const std::filesystem::path& wav, const std::string& mode,
                          const std::optional<std::string>& text) const {
    AudioClip audio = read_wav(wav);
    py::gil_scoped_release release;
    return to_json(assessor_->assess_audio(audio, mode_from_string(mode), text, wav.stem().string())).dump();
  }

  std::string assess_bytes(const py::bytes& data, const std::string& mode, const std::optional<std::string>& text,
                           const std::string& utterance_id) const {
    const std::string raw = data;
    const AudioClip audio =
        decode_wav(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), utterance_id);
    py::gil_scoped_release release;
    return to_json(assessor_->assess_audio(audio, mode_from_string(mode), text, utterance_id)).dump();
  }

 private:
  std::shared_ptr<const Assessor> assessor_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-task pronunciation assessment (C++ core).";

  auto base = py::register_exception<Error>(m, "MultipaError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<SchemaViolation>(m, "SchemaViolation", base.ptr());
  py::register_exception<DegenerateInput>(m, "DegenerateInput", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<AssessmentUnavailable>(m, "AssessmentUnavailable", base.ptr());
  py::register_exception<ModelUnavailable>(m, "ModelUnavailable", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  m.def(
      "levenshtein", [](const std::string& a, const std::string& b) { return levenshtein(a, b); }, py::arg("a"),
      py::arg("b"), "Unit-cost edit distance between two strings.");
  m.def(
      "levenshtein",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return levenshtein(a, b); },
      py::arg("a"), py::arg("b"), "Unit-cost edit distance between two token sequences.");

  m.def(
      "pcc", [](const std::vector<double>& x, const std::vector<double>& y) { return pcc(x, y); }, py::arg("x"),
      py::arg("y"), "Pearson correlation; raises DegenerateInput for constant or too-short input.");

  m.def(
      "completeness",
      [](const std::vector<double>& durations, double threshold) {
        return completeness_from_durations(durations, CompletenessConfig{threshold}).score;
      },
      py::arg("durations"), py::arg("threshold") = CompletenessConfig{}.duration_threshold,
      "Fraction of words whose aligned duration reaches the threshold (seconds).");

  m.def(
      "sweep_thresholds",
      [](const std::vector<double>& complete, const std::vector<double>& incomplete) {
        const auto r = sweep_thresholds(complete, incomplete);
        return py::dict(py::arg("thresholds") = r.threshold_grid, py::arg("f1") = r.f1_per_threshold,
                        py::arg("best_threshold") = r.best_threshold, py::arg("best_f1") = r.best_f1);
      },
      py::arg("complete"), py::arg("incomplete"),
      "F1 of flagging incomplete words (duration < threshold) over the default threshold grid.");

  m.def(
      "synthetic_durations",
      [](std::uint64_t seed) {
        std::vector<double> complete, incomplete;
        sample_duration_populations(DurationPopulations{}, seed, complete, incomplete);
        return py::make_tuple(complete, incomplete);
      },
      py::arg("seed") = 0, "Samples (complete, incomplete) word-duration populations.");

  m.def(
      "write_synthetic_corpus",
      [](const std::filesystem::path& out, std::size_t train, std::size_t test, std::size_t speakers,
         std::uint64_t seed) {
        SyntheticCorpusOptions o;
        o.train_utterances = train;
        o.test_utterances = test;
        o.speakers = speakers;
        o.seed = seed;
        o.validate();
        py::gil_scoped_release release;
        write_synthetic_corpus(out, o);
      },
      py::arg("out_dir"), py::arg("train") = 40, py::arg("test") = 20, py::arg("speakers") = 8, py::arg("seed") = 7,
      "Writes a labelled synthetic corpus (wav/, train.json, test.json).");

  m.def(
      "_dataset_summary",
      [](const std::filesystem::path& path) {
        const Dataset d = load_dataset(path);
        nlohmann::json ids = nlohmann::json::object();
        for (const Split s : {Split::kTrain, Split::kTest}) {
          auto& list = ids[std::string(to_string(s))] = nlohmann::json::array();
          for (const auto* r : d.split(s)) list.push_back(r->utterance_id);
        }
        return nlohmann::json{{"utterances", ids}, {"minima", label_minima(d.split(Split::kTrain))}}.dump();
      },
      py::arg("path"));

  m.def("_default_config", [] { return nlohmann::json(AppConfig{}).dump(); });

  m.def(
      "_train",
      [](const std::string& config_json) {
        const AppConfig config = config_from_json(config_json);
        if (config.checkpoint_path.empty()) throw ConfigError("no checkpoint_path given");
        config.require_paths(true, false);
        py::gil_scoped_release release;
        const Dataset dataset = load_dataset(config.dataset_path);
        std::vector<std::string> skipped;
        const auto examples =
            extract_training_examples(*make_extractor(config), dataset.split(Split::kTrain), dataset.ranges, &skipped);
        const auto result = train(examples, config.training, config.model, dataset.ranges);
        save_checkpoint(config.checkpoint_path, result.trained);
        return nlohmann::json{{"log", result.log}, {"skipped", skipped}}.dump();
      },
      py::arg("config_json"));

  m.def(
      "_evaluate",
      [](const std::string& config_json, const std::string& mode, std::size_t seeds) {
        const AppConfig config = config_from_json(config_json);
        config.require_paths(true, false);
        py::gil_scoped_release release;
        const Dataset dataset = load_dataset(config.dataset_path);
        const auto result = run_experiment(config, dataset, modes_of(mode), seeds);
        return nlohmann::json{{"reports", result.reports}, {"table", render_table(result.reports)}}.dump();
      },
      py::arg("config_json"), py::arg("mode"), py::arg("seeds"));

  py::class_<PyAssessor>(m, "_Assessor")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def("assess_file", &PyAssessor::assess_file, py::arg("wav"), py::arg("mode"), py::arg("text"))
      .def("assess_bytes", &PyAssessor::assess_bytes, py::arg("data"), py::arg("mode"), py::arg("text"),
           py::arg("utterance_id"));
}
