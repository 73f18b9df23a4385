#include "multipa/acoustic.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "model_ids.hpp"
#include "multipa/errors.hpp"

namespace multipa {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

LogMelFrontEnd::LogMelFrontEnd(std::string model_id) : model_id_(std::move(model_id)) {
  bins_ = detail::parse_sized_model_id(model_id_, "logmel-", 128);
  constexpr int kSpectrum = kFftSize / 2 + 1;
  window_.resize(kWindowSamples);
  for (int i = 0; i < kWindowSamples; ++i) {
    window_[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (kWindowSamples - 1));
  }
  // triangular filters equally spaced on the mel scale between 20 Hz and Nyquist
  const double lo = hz_to_mel(20.0), hi = hz_to_mel(kCanonicalSampleRate / 2.0);
  std::vector<double> edges(bins_ + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins_ + 1));
  }
  filterbank_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins_), kSpectrum);
  for (std::size_t b = 0; b < bins_; ++b) {
    for (int k = 0; k < kSpectrum; ++k) {
      const double f = static_cast<double>(k) * kCanonicalSampleRate / kFftSize;
      double w = 0.0;
      if (f > edges[b] && f <= edges[b + 1]) w = (f - edges[b]) / (edges[b + 1] - edges[b]);
      else if (f > edges[b + 1] && f < edges[b + 2]) w = (edges[b + 2] - f) / (edges[b + 2] - edges[b + 1]);
      filterbank_(static_cast<Eigen::Index>(b), k) = w;
    }
  }
}

std::size_t LogMelFrontEnd::frame_count(std::size_t samples) {
  if (samples <= static_cast<std::size_t>(kWindowSamples)) return 1;
  return 1 + (samples - kWindowSamples) / kHopSamples;
}

AcousticFrameSeq LogMelFrontEnd::frames(const AudioClip& audio) const {
  validate_audio(audio);
  const std::size_t n = frame_count(audio.samples.size());
  AcousticFrameSeq out;
  out.frame_hop = kFrameHop;
  out.frames.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bins_));
  Eigen::FFT<double> fft;
  std::vector<double> buf(kFftSize);
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd power(kFftSize / 2 + 1);
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const std::size_t begin = t * kHopSamples;
    for (int i = 0; i < kWindowSamples; ++i) {
      const std::size_t j = begin + static_cast<std::size_t>(i);
      if (j < audio.samples.size()) buf[i] = audio.samples[j] * window_[i];
    }
    fft.fwd(spec, buf);
    for (int k = 0; k <= kFftSize / 2; ++k) power[k] = std::norm(spec[static_cast<std::size_t>(k)]);
    out.frames.row(static_cast<Eigen::Index>(t)) = (filterbank_ * power).array().max(1e-10).log().transpose();
  }
  return out;
}

}  // namespace multipa
