#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "genre/dataset.h"
#include "genre/features.h"
#include "genre/matrix.h"

namespace genre {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::size_t kDefaultHiddenUnits = 256;

/// Dense(d -> hidden, ReLU) -> Dropout -> Dense(hidden -> C, softmax).
struct MlpParams {
  Matrix w1;  // d x hidden
  std::vector<double> b1;
  Matrix w2;  // hidden x C
  std::vector<double> b2;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t output_dim() const noexcept { return w2.cols(); }

  static MlpParams zeros(std::size_t d, std::size_t hidden, std::size_t classes);
  bool operator==(const MlpParams&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::size_t batch_size = 40;
  std::size_t epochs = 20;
  double dropout_rate = 0.5;
  double val_fraction = 0.1;
  std::uint64_t seed = 42;
  std::size_t hidden_units = kDefaultHiddenUnits;
  bool standardize = true;

  void validate() const;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const MlpParams& params);
};

struct EpochStats {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

/// Per-dimension affine map x -> (x - mean) / std learned on training data.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;

  static Standardizer fit(const Matrix& X, const std::vector<std::size_t>& rows);
  static Standardizer identity(std::size_t d);
  std::vector<double> apply(std::span<const double> x) const;
  bool operator==(const Standardizer&) const = default;
};

struct ForwardCache {
  std::vector<double> x;
  std::vector<double> pre_activation;  // W1^T x + b1
  std::vector<double> hidden;          // relu output after dropout scaling
  std::vector<double> mask;            // 0/1 keep mask; empty in eval mode
  double dropout_rate = 0.0;
  std::vector<double> probs;
};

/// Glorot-uniform weights, zero biases, deterministic in the seed.
MlpParams init_params(std::size_t d, std::size_t classes, std::uint64_t seed,
                      std::size_t hidden = kDefaultHiddenUnits);

/// Eval-mode forward pass (no dropout).
ForwardCache forward(const MlpParams& params, std::span<const double> x);
/// Train-mode forward pass with inverted dropout: hidden units are multiplied
/// by mask / (1 - dropout_rate).
ForwardCache forward(const MlpParams& params, std::span<const double> x, std::span<const double> mask,
                     double dropout_rate);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kLossEps = 1e-12;
/// -Σ y_k log(p_k + eps).
double loss_ce(std::span<const double> probs, std::span<const double> onehot);

/// Gradients of loss_ce(forward(x)) w.r.t. every parameter block, reusing the
/// cached dropout mask.
MlpParams backward(const MlpParams& params, const ForwardCache& cache, std::span<const double> onehot);

/// Elementwise Adam update with bias correction. `t` is the already
/// incremented step count.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, const TrainConfig& config);

/// Increments state.t, then applies adam_update to every parameter block.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& config);

/// A trained classifier together with everything needed to reproduce its
/// inputs.
struct Model {
  std::string model_version;
  std::vector<std::string> class_names;
  FeatureMode feature_mode = FeatureMode::mfcc_mean;
  FeatureConfig feature_config;
  std::string feature_fingerprint;
  Standardizer standardizer;
  MlpParams params;
  SplitSpec split;
  TrainConfig train_config;

  std::size_t input_dim() const noexcept { return params.input_dim(); }
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Trains on `train_ds`. The final val_fraction of a once-shuffled copy is
/// held out for validation; standardization is fitted on the remainder.
/// `resume`, when given, supplies starting weights and standardization.
TrainResult train(const Dataset& train_ds, const TrainConfig& config, const Model* resume = nullptr);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Standardizes, runs the eval-mode forward pass and takes the argmax.
Prediction predict(const Model& model, std::span<const double> features);

/// Stable content hash of the weights and standardization.
std::string compute_model_version(const Model& model);

void save_model(const Model& model, const std::filesystem::path& path);
std::string model_to_json(const Model& model);
Model load_model(const std::filesystem::path& path);
Model model_from_json(const std::string& text);

}  // namespace genre
