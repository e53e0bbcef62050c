#include "genre/inference.h"

#include "genre/features.h"

namespace genre {

ClipPrediction classify_buffer(const Model& model, const AudioBuffer& buf) {
  const AudioBuffer at_rate = resample(buf, model.feature_config.sample_rate_hz);
  const auto features = clip_features(at_rate, model.feature_config, model.feature_mode);
  auto p = predict(model, features.values);
  ClipPrediction out;
  out.label = p.label;
  out.genre = model.class_names.at(static_cast<std::size_t>(p.label));
  out.probs = std::move(p.probs);
  return out;
}

ClipPrediction classify_audio(const Model& model, std::span<const std::uint8_t> wav_bytes) {
  return classify_buffer(model, decode_wav(wav_bytes));
}

}  // namespace genre
