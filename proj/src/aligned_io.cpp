#include "multipa/aligned_io.hpp"

#include "multipa/binary_io.hpp"
#include "multipa/errors.hpp"

namespace multipa {

namespace {
constexpr std::string_view kSidecarMagic = "MPAPOST1";
}

nlohmann::json aligned_to_json(const AlignedTranscript& aligned) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : aligned.words) {
    nlohmann::json phones = nlohmann::json::array();
    for (const auto& p : w.phones) phones.push_back({{"label", p.label}, {"start", p.start}, {"end", p.end}});
    words.push_back({{"text", w.text}, {"start", w.start}, {"end", w.end}, {"phones", std::move(phones)}});
  }
  return {{"utterance_id", aligned.utterance_id},
          {"source", std::string(to_string(aligned.source))},
          {"words", std::move(words)}};
}

AlignedTranscript aligned_from_json(const nlohmann::json& doc) {
  try {
    AlignedTranscript out;
    out.utterance_id = doc.at("utterance_id").get<std::string>();
    out.source = transcript_source_from_string(doc.at("source").get<std::string>());
    for (const auto& w : doc.at("words")) {
      TimedWord word{w.at("text").get<std::string>(), w.at("start").get<double>(), w.at("end").get<double>(), {}};
      for (const auto& p : w.at("phones")) {
        word.phones.push_back({p.at("label").get<std::string>(), p.at("start").get<double>(), p.at("end").get<double>(), {}});
      }
      out.words.push_back(std::move(word));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed aligned transcript: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_posterior_sidecar(const AlignedTranscript& aligned) {
  std::size_t cols = 0;
  for (const auto& w : aligned.words) {
    for (const auto& p : w.phones) cols = std::max(cols, p.posterior.size());
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(aligned.phone_count()), static_cast<Eigen::Index>(cols));
  Eigen::Index row = 0;
  for (const auto& w : aligned.words) {
    for (const auto& p : w.phones) {
      if (p.posterior.size() != cols) throw PreconditionError("posterior rows have inconsistent widths");
      for (std::size_t c = 0; c < cols; ++c) m(row, static_cast<Eigen::Index>(c)) = p.posterior[c];
      ++row;
    }
  }
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kSidecarMagic.data(), kSidecarMagic.size());
  binio::put_string(out, aligned.utterance_id);
  binio::put_matrix(out, m);
  return out;
}

void attach_posteriors(AlignedTranscript& aligned, std::span<const std::uint8_t> sidecar) {
  binio::Reader r(sidecar, "posterior sidecar");
  r.expect_magic(kSidecarMagic);
  const std::string id = r.string();
  if (id != aligned.utterance_id) {
    throw PreconditionError("posterior sidecar is for '" + id + "', not '" + aligned.utterance_id + "'");
  }
  const Eigen::MatrixXd m = r.matrix();
  r.expect_done();
  if (static_cast<std::size_t>(m.rows()) != aligned.phone_count()) {
    throw PreconditionError("posterior sidecar has " + std::to_string(m.rows()) + " rows for " +
                            std::to_string(aligned.phone_count()) + " phones");
  }
  Eigen::Index row = 0;
  for (auto& w : aligned.words) {
    for (auto& p : w.phones) {
      p.posterior.assign(m.cols(), 0.0);
      for (Eigen::Index c = 0; c < m.cols(); ++c) p.posterior[static_cast<std::size_t>(c)] = m(row, c);
      ++row;
    }
  }
}

void save_aligned(const AlignedTranscript& aligned, const std::filesystem::path& json_path,
                  const std::filesystem::path& sidecar_path) {
  const std::string text = aligned_to_json(aligned).dump(1);
  binio::write_file_atomic(json_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  binio::write_file_atomic(sidecar_path, encode_posterior_sidecar(aligned));
}

AlignedTranscript load_aligned(const std::filesystem::path& json_path, const std::filesystem::path& sidecar_path) {
  const auto bytes = binio::read_file(json_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(json_path.string() + ": " + e.what());
  }
  auto aligned = aligned_from_json(doc);
  if (!sidecar_path.empty()) attach_posteriors(aligned, binio::read_file(sidecar_path));
  return aligned;
}

}  // namespace multipa
