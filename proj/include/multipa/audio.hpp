#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multipa/types.hpp"

namespace multipa {

// Decodes a RIFF/WAVE byte buffer (PCM 8/16/24/32-bit or IEEE float 32/64,
// any channel count). Multi-channel input is averaged to mono. Throws
// PreconditionError on malformed input.
AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string id = {});

AudioClip read_wav(const std::filesystem::path& path, std::string id = {});

// 16-bit PCM mono.
std::vector<std::uint8_t> encode_wav(const AudioClip& audio);
void write_wav(const std::filesystem::path& path, const AudioClip& audio);

// Band-limited (windowed-sinc) resampling.
std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate);

// Resamples to 16 kHz when needed and validates the result.
AudioClip canonicalize(AudioClip audio);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t audio_hash(const AudioClip& audio);
std::string hex64(std::uint64_t value);

}  // namespace multipa
