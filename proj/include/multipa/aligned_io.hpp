#pragma once

// On-disk form of aligned transcripts: a JSON document with word and phone
// spans, plus a binary sidecar holding the phone posterior matrix (one row
// per phone in transcript order), tagged with the utterance id.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "multipa/types.hpp"

namespace multipa {

nlohmann::json aligned_to_json(const AlignedTranscript& aligned);
// Posteriors are left empty; attach them from the sidecar.
AlignedTranscript aligned_from_json(const nlohmann::json& doc);

std::vector<std::uint8_t> encode_posterior_sidecar(const AlignedTranscript& aligned);
// Fills TimedPhone::posterior from a sidecar. Throws PreconditionError when
// the sidecar belongs to another utterance or its row count differs.
void attach_posteriors(AlignedTranscript& aligned, std::span<const std::uint8_t> sidecar);

void save_aligned(const AlignedTranscript& aligned, const std::filesystem::path& json_path,
                  const std::filesystem::path& sidecar_path);
AlignedTranscript load_aligned(const std::filesystem::path& json_path, const std::filesystem::path& sidecar_path = {});

}  // namespace multipa
