#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genre/audio_io.h"
#include "genre/model.h"

namespace genre {

struct ClipPrediction {
  int label = 0;
  std::string genre;
  std::vector<double> probs;  // aligned with model.class_names
};

/// Resamples to the model's feature rate, extracts features in the model's
/// mode and predicts. Shared by the CLI and the HTTP service.
ClipPrediction classify_buffer(const Model& model, const AudioBuffer& buf);

/// Decodes WAV bytes, then classify_buffer.
ClipPrediction classify_audio(const Model& model, std::span<const std::uint8_t> wav_bytes);

}  // namespace genre
