#include "multipa/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "multipa/errors.hpp"

namespace multipa {
namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

double decode_sample(const std::uint8_t* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (bits) {
    case 8: return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;
      return v / 8388608.0;
    }
    default: return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
  }
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string id) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw PreconditionError("not a RIFF/WAVE stream");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) throw PreconditionError("truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && size >= 40 && available >= 40) {
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Streaming writers leave the size field at 0 or 0xFFFFFFFF.
      data_size = (size == 0 || size > available) ? available : size;
    }
    pos = body + size + (size & 1U);
    if (data && format) break;
  }
  if (!format) throw PreconditionError("missing fmt chunk");
  if (!data) throw PreconditionError("missing data chunk");
  if (format != kFormatPcm && format != kFormatFloat) {
    throw PreconditionError("unsupported WAV encoding " + std::to_string(format));
  }
  const bool bits_ok = format == kFormatPcm ? (bits == 8 || bits == 16 || bits == 24 || bits == 32)
                                            : (bits == 32 || bits == 64);
  if (!bits_ok || channels == 0 || rate == 0) throw PreconditionError("unsupported WAV sample layout");

  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  const std::size_t frames = data_size / frame_bytes;
  AudioClip clip;
  clip.id = std::move(id);
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      acc += decode_sample(data + f * frame_bytes + c * (bits / 8), format, bits);
    }
    clip.samples[f] = static_cast<float>(acc / channels);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open audio file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (id.empty()) id = path.stem().string();
  try {
    return decode_wav(bytes, std::move(id));
  } catch (const PreconditionError& e) {
    throw PreconditionError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& audio) {
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (float s : audio.samples) {
    const double clipped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32767.0))));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write audio file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw PreconditionError("sample rates must be positive");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const double cutoff = std::min(1.0, ratio);  // normalized to the input Nyquist
  constexpr int kHalfTaps = 16;
  const double support = kHalfTaps / cutoff;
  const auto out_len = static_cast<std::size_t>(std::floor(samples.size() * ratio));
  std::vector<float> out(out_len);
  const auto n = static_cast<long>(samples.size());
  for (std::size_t i = 0; i < out_len; ++i) {
    const double center = i / ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(center - support)));
    const long hi = std::min(n - 1, static_cast<long>(std::floor(center + support)));
    double acc = 0.0, wsum = 0.0;
    for (long j = lo; j <= hi; ++j) {
      const double x = (j - center) * cutoff;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * (j - center) / support);  // Hann
      const double w = sinc * window;
      acc += w * samples[static_cast<std::size_t>(j)];
      wsum += w;
    }
    out[i] = static_cast<float>(wsum != 0.0 ? acc / wsum : 0.0);
  }
  return out;
}

AudioClip canonicalize(AudioClip audio) {
  if (audio.sample_rate != kCanonicalSampleRate) {
    audio.samples = resample(audio.samples, audio.sample_rate, kCanonicalSampleRate);
    audio.sample_rate = kCanonicalSampleRate;
  }
  validate_audio(audio);
  return audio;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), seed);
}

std::uint64_t audio_hash(const AudioClip& audio) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(audio.samples.data());
  std::uint64_t h = fnv1a64(std::span(bytes, audio.samples.size() * sizeof(float)));
  const std::string rate = std::to_string(audio.sample_rate);
  return fnv1a64(rate, h);
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return s;
}

}  // namespace multipa
