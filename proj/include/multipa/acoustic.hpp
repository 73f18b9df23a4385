#pragma once

// Frozen acoustic front end: log-mel filterbank frames (25 ms window, 20 ms
// hop). The trainable part of the acoustic branch lives in the assessment
// model.

#include <string>

#include <Eigen/Dense>

#include "multipa/types.hpp"

namespace multipa {

class LogMelFrontEnd {
 public:
  static constexpr int kWindowSamples = 400;
  static constexpr int kHopSamples = 320;
  static constexpr int kFftSize = 512;
  static constexpr double kFrameHop = 0.020;

  // model_id: "logmel-<bins>".
  explicit LogMelFrontEnd(std::string model_id);

  std::size_t dim() const { return bins_; }
  const std::string& model_id() const { return model_id_; }

  // Throws PreconditionError on invalid or empty audio.
  AcousticFrameSeq frames(const AudioClip& audio) const;

  static std::size_t frame_count(std::size_t samples);

 private:
  std::string model_id_;
  std::size_t bins_ = 40;
  Eigen::MatrixXd filterbank_;  // bins x (kFftSize/2 + 1)
  Eigen::VectorXd window_;
};

}  // namespace multipa
