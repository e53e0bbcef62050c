#include "genre/model.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "genre/error.h"

namespace genre {

using nlohmann::json;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::invalid_params, what);
}

template <typename F>
void for_each_block(MlpParams& a, const MlpParams& b, F&& f) {
  f(std::span<double>(a.w1.data()), std::span<const double>(b.w1.data()));
  f(std::span<double>(a.b1), std::span<const double>(b.b1));
  f(std::span<double>(a.w2.data()), std::span<const double>(b.w2.data()));
  f(std::span<double>(a.b2), std::span<const double>(b.b2));
}

std::vector<double> onehot(int label, std::size_t classes) {
  std::vector<double> y(classes, 0.0);
  y[static_cast<std::size_t>(label)] = 1.0;
  return y;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void accumulate(MlpParams& acc, const MlpParams& g) {
  for_each_block(acc, g, [](std::span<double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  });
}

void scale(MlpParams& p, double s) {
  for (auto* block : {&p.w1.data(), &p.b1, &p.w2.data(), &p.b2}) {
    for (double& v : *block) v *= s;
  }
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows) {
    throw Error(Errc::schema_mismatch, std::string(name) + " must have " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(Errc::schema_mismatch, std::string(name) + " row " + std::to_string(r) + " must have " +
                                             std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

std::vector<double> vector_from_json(const json& j, std::size_t size, const char* name) {
  if (!j.is_array() || j.size() != size) {
    throw Error(Errc::schema_mismatch, std::string(name) + " must have " + std::to_string(size) + " entries");
  }
  return j.get<std::vector<double>>();
}

json feature_config_to_json(const FeatureConfig& c) {
  return json{{"sample_rate_hz", c.sample_rate_hz},
              {"frame_len", c.frame_len},
              {"hop", c.hop},
              {"n_fft", c.n_fft},
              {"n_mels", c.n_mels},
              {"n_mfcc", c.n_mfcc},
              {"fmin_hz", c.fmin_hz},
              {"fmax_hz", c.fmax_hz},
              {"sfm_db_max", c.sfm_db_max},
              {"pitch_min_hz", c.pitch_min_hz},
              {"pitch_max_hz", c.pitch_max_hz},
              {"f0_grid_step_hz", c.f0_grid_step_hz},
              {"bark_edges_hz", c.bark_edges_hz},
              {"contrast_edges_hz", c.effective_contrast_edges()},
              {"eps", c.eps}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig c;
  c.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  c.frame_len = j.at("frame_len").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.n_fft = j.at("n_fft").get<std::size_t>();
  c.n_mels = j.at("n_mels").get<std::size_t>();
  c.n_mfcc = j.at("n_mfcc").get<std::size_t>();
  c.fmin_hz = j.at("fmin_hz").get<double>();
  c.fmax_hz = j.at("fmax_hz").get<double>();
  c.sfm_db_max = j.at("sfm_db_max").get<double>();
  c.pitch_min_hz = j.at("pitch_min_hz").get<double>();
  c.pitch_max_hz = j.at("pitch_max_hz").get<double>();
  c.f0_grid_step_hz = j.at("f0_grid_step_hz").get<double>();
  c.bark_edges_hz = j.at("bark_edges_hz").get<std::vector<double>>();
  c.contrast_edges_hz = j.at("contrast_edges_hz").get<std::vector<double>>();
  c.eps = j.at("eps").get<double>();
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
              {"beta2", c.beta2},                 {"epsilon", c.epsilon},
              {"batch_size", c.batch_size},       {"epochs", c.epochs},
              {"dropout_rate", c.dropout_rate},   {"val_fraction", c.val_fraction},
              {"seed", c.seed},                   {"hidden_units", c.hidden_units},
              {"standardize", c.standardize}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.standardize = j.at("standardize").get<bool>();
  return c;
}

struct SetMetrics {
  double loss = 0.0;
  double acc = 0.0;
};

SetMetrics evaluate_rows(const MlpParams& params, const Matrix& Z, const std::vector<int>& y,
                         const std::vector<std::size_t>& rows, std::size_t classes) {
  if (rows.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  SetMetrics m;
  for (std::size_t r : rows) {
    const auto cache = forward(params, Z.row(r));
    m.loss += loss_ce(cache.probs, onehot(y[r], classes));
    m.acc += argmax(cache.probs) == y[r] ? 1.0 : 0.0;
  }
  m.loss /= static_cast<double>(rows.size());
  m.acc /= static_cast<double>(rows.size());
  return m;
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t d, std::size_t hidden, std::size_t classes) {
  MlpParams p;
  p.w1 = Matrix(d, hidden);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(hidden, classes);
  p.b2.assign(classes, 0.0);
  return p;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(epsilon > 0.0, "epsilon must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction must lie in [0, 1)");
  require(hidden_units >= 1, "hidden_units must be >= 1");
}

AdamState AdamState::zeros_like(const MlpParams& params) {
  AdamState s;
  s.m = MlpParams::zeros(params.input_dim(), params.hidden_dim(), params.output_dim());
  s.v = s.m;
  return s;
}

Standardizer Standardizer::fit(const Matrix& X, const std::vector<std::size_t>& rows) {
  require(!rows.empty(), "cannot fit standardization on zero rows");
  Standardizer s;
  const std::size_t d = X.cols();
  s.means.assign(d, 0.0);
  s.stds.assign(d, 0.0);
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.means[j] += X(r, j);
  }
  for (double& m : s.means) m /= static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = X(r, j) - s.means[j];
      s.stds[j] += dev * dev;
    }
  }
  for (double& v : s.stds) {
    v = std::sqrt(v / static_cast<double>(rows.size()));
    if (!(v > 1e-12)) v = 1.0;  // constant column
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t d) {
  return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - means[j]) / stds[j];
  return z;
}

MlpParams init_params(std::size_t d, std::size_t classes, std::uint64_t seed, std::size_t hidden) {
  require(d >= 1 && classes >= 2 && hidden >= 1, "init_params needs d >= 1, C >= 2, hidden >= 1");
  Rng rng(seed);
  MlpParams p = MlpParams::zeros(d, hidden, classes);
  const double limit1 = std::sqrt(6.0 / static_cast<double>(d + hidden));
  for (double& w : p.w1.data()) w = (2.0 * rng.unit() - 1.0) * limit1;
  const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  for (double& w : p.w2.data()) w = (2.0 * rng.unit() - 1.0) * limit2;
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

ForwardCache forward(const MlpParams& params, std::span<const double> x, std::span<const double> mask,
                     double dropout_rate) {
  const std::size_t d = params.input_dim();
  const std::size_t h = params.hidden_dim();
  const std::size_t c = params.output_dim();
  if (x.size() != d) throw Error(Errc::dimension_mismatch, "input has " + std::to_string(x.size()) +
                                                               " features, model expects " + std::to_string(d));
  if (!mask.empty() && mask.size() != h) throw Error(Errc::dimension_mismatch, "dropout mask size");

  ForwardCache cache;
  cache.x.assign(x.begin(), x.end());
  cache.mask.assign(mask.begin(), mask.end());
  cache.dropout_rate = mask.empty() ? 0.0 : dropout_rate;
  cache.pre_activation = params.b1;
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto w = params.w1.row(i);
    for (std::size_t j = 0; j < h; ++j) cache.pre_activation[j] += w[j] * xi;
  }
  cache.hidden.resize(h);
  const double keep_scale = mask.empty() ? 1.0 : 1.0 / (1.0 - dropout_rate);
  for (std::size_t j = 0; j < h; ++j) {
    double a = std::max(0.0, cache.pre_activation[j]);
    if (!mask.empty()) a *= mask[j] * keep_scale;
    cache.hidden[j] = a;
  }
  std::vector<double> logits = params.b2;
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    if (a == 0.0) continue;
    const auto w = params.w2.row(j);
    for (std::size_t k = 0; k < c; ++k) logits[k] += w[k] * a;
  }
  cache.probs = softmax(logits);
  return cache;
}

ForwardCache forward(const MlpParams& params, std::span<const double> x) {
  return forward(params, x, {}, 0.0);
}

double loss_ce(std::span<const double> probs, std::span<const double> onehot) {
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (onehot[k] != 0.0) loss -= onehot[k] * std::log(probs[k] + kLossEps);
  }
  return loss;
}

MlpParams backward(const MlpParams& params, const ForwardCache& cache, std::span<const double> onehot) {
  const std::size_t d = params.input_dim();
  const std::size_t h = params.hidden_dim();
  const std::size_t c = params.output_dim();
  MlpParams g = MlpParams::zeros(d, h, c);

  for (std::size_t k = 0; k < c; ++k) g.b2[k] = cache.probs[k] - onehot[k];
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    if (a == 0.0) continue;
    auto row = g.w2.row(j);
    for (std::size_t k = 0; k < c; ++k) row[k] = a * g.b2[k];
  }

  const double keep_scale = cache.mask.empty() ? 1.0 : 1.0 / (1.0 - cache.dropout_rate);
  for (std::size_t j = 0; j < h; ++j) {
    if (!(cache.pre_activation[j] > 0.0)) continue;
    if (!cache.mask.empty() && cache.mask[j] == 0.0) continue;
    const auto w = params.w2.row(j);
    double dh = 0.0;
    for (std::size_t k = 0; k < c; ++k) dh += w[k] * g.b2[k];
    if (!cache.mask.empty()) dh *= cache.mask[j] * keep_scale;
    g.b1[j] = dh;
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = cache.x[i];
    if (xi == 0.0) continue;
    auto row = g.w1.row(i);
    for (std::size_t j = 0; j < h; ++j) row[j] = xi * g.b1[j];
  }
  return g;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, const TrainConfig& config) {
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& config) {
  ++state.t;
  adam_update(params.w1.data(), grads.w1.data(), state.m.w1.data(), state.v.w1.data(), state.t, config);
  adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, state.t, config);
  adam_update(params.w2.data(), grads.w2.data(), state.m.w2.data(), state.v.w2.data(), state.t, config);
  adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, state.t, config);
}

TrainResult train(const Dataset& train_ds, const TrainConfig& config, const Model* resume) {
  config.validate();
  train_ds.check();
  const std::size_t n = train_ds.size();
  const std::size_t d = train_ds.dim();
  const std::size_t classes = train_ds.class_names.size();
  if (n == 0 || d == 0) throw Error(Errc::invalid_params, "training set is empty");
  if (classes < 2) throw Error(Errc::invalid_params, "training needs at least two classes");
  if (resume != nullptr) {
    if (resume->input_dim() != d) {
      throw Error(Errc::dimension_mismatch, "resumed model expects " + std::to_string(resume->input_dim()) +
                                                " features, data has " + std::to_string(d));
    }
    if (resume->class_names != train_ds.class_names) {
      throw Error(Errc::schema_mismatch, "resumed model was trained on a different class set");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto n_fit = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - config.val_fraction) + 1e-9));
  if (n_fit == 0) throw Error(Errc::invalid_params, "validation split leaves no training rows");
  std::vector<std::size_t> fit_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
  std::vector<std::size_t> val_rows(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());

  TrainResult result;
  Model& model = result.model;
  model.class_names = train_ds.class_names;
  model.feature_mode = train_ds.feature_mode;
  model.feature_fingerprint = train_ds.config_fingerprint;
  model.train_config = config;
  if (resume != nullptr) {
    model.standardizer = resume->standardizer;
    model.params = resume->params;
    model.feature_config = resume->feature_config;
    model.feature_mode = resume->feature_mode;
    model.feature_fingerprint = resume->feature_fingerprint;
  } else {
    model.standardizer = config.standardize ? Standardizer::fit(train_ds.X, fit_rows) : Standardizer::identity(d);
    model.params = init_params(d, classes, config.seed, config.hidden_units);
  }

  Matrix Z(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto z = model.standardizer.apply(train_ds.X.row(r));
    std::copy(z.begin(), z.end(), Z.row(r).begin());
  }

  const std::size_t hidden = model.params.hidden_dim();
  AdamState state = AdamState::zeros_like(model.params);
  std::vector<double> mask(hidden);
  const double keep = 1.0 - config.dropout_rate;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> epoch_order = fit_rows;
    rng.shuffle(epoch_order);
    for (std::size_t start = 0; start < epoch_order.size(); start += config.batch_size) {
      const std::size_t end = std::min(epoch_order.size(), start + config.batch_size);
      MlpParams grads = MlpParams::zeros(d, hidden, classes);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t r = epoch_order[b];
        ForwardCache cache;
        if (config.dropout_rate > 0.0) {
          for (double& m : mask) m = rng.unit() < keep ? 1.0 : 0.0;
          cache = forward(model.params, Z.row(r), mask, config.dropout_rate);
        } else {
          cache = forward(model.params, Z.row(r));
        }
        accumulate(grads, backward(model.params, cache, onehot(train_ds.y[r], classes)));
      }
      scale(grads, 1.0 / static_cast<double>(end - start));
      adam_step(model.params, grads, state, config);
    }

    const auto fit_metrics = evaluate_rows(model.params, Z, train_ds.y, fit_rows, classes);
    const auto val_metrics = evaluate_rows(model.params, Z, train_ds.y, val_rows, classes);
    result.history.epochs.push_back({fit_metrics.loss, fit_metrics.acc, val_metrics.loss, val_metrics.acc});
  }
  model.model_version = compute_model_version(model);
  return result;
}

Prediction predict(const Model& model, std::span<const double> features) {
  if (features.size() != model.input_dim()) {
    throw Error(Errc::dimension_mismatch, "feature vector has " + std::to_string(features.size()) +
                                              " values, model expects " + std::to_string(model.input_dim()));
  }
  const auto z = model.standardizer.apply(features);
  auto cache = forward(model.params, z);
  Prediction p;
  p.label = argmax(cache.probs);
  p.probs = std::move(cache.probs);
  return p;
}

std::string compute_model_version(const Model& model) {
  const json payload = {{"W1", matrix_to_json(model.params.w1)},
                        {"b1", model.params.b1},
                        {"W2", matrix_to_json(model.params.w2)},
                        {"b2", model.params.b2},
                        {"means", model.standardizer.means},
                        {"stds", model.standardizer.stds},
                        {"classes", model.class_names},
                        {"feature_mode", std::string(feature_mode_name(model.feature_mode))},
                        {"feature_config", model.feature_config.fingerprint()}};
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : payload.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "mlp-%012llx", static_cast<unsigned long long>(h & 0xFFFFFFFFFFFFull));
  return buf;
}

std::string model_to_json(const Model& model) {
  const json doc = {
      {"format_version", kModelFormatVersion},
      {"model_version", model.model_version.empty() ? compute_model_version(model) : model.model_version},
      {"class_names", model.class_names},
      {"feature_mode", std::string(feature_mode_name(model.feature_mode))},
      {"feature_config", feature_config_to_json(model.feature_config)},
      {"feature_config_fingerprint", model.feature_fingerprint},
      {"standardization", {{"means", model.standardizer.means}, {"stds", model.standardizer.stds}}},
      {"layers",
       {{"input", model.params.input_dim()}, {"hidden", model.params.hidden_dim()}, {"output", model.params.output_dim()}}},
      {"weights",
       {{"W1", matrix_to_json(model.params.w1)},
        {"b1", model.params.b1},
        {"W2", matrix_to_json(model.params.w2)},
        {"b2", model.params.b2}}},
      {"split",
       {{"train_fraction", model.split.train_fraction}, {"seed", model.split.seed}, {"stratified", model.split.stratified}}},
      {"train_config", train_config_to_json(model.train_config)},
  };
  return doc.dump(1) + "\n";
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

Model model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("format_version")) {
      throw Error(Errc::schema_mismatch, "missing format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(Errc::version_mismatch, "model format " + std::to_string(version) + ", expected " +
                                              std::to_string(kModelFormatVersion));
    }
    Model m;
    m.model_version = doc.at("model_version").get<std::string>();
    m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    m.feature_mode = parse_feature_mode(doc.at("feature_mode").get<std::string>());
    m.feature_config = feature_config_from_json(doc.at("feature_config"));
    m.feature_config.validate();
    m.feature_fingerprint = doc.at("feature_config_fingerprint").get<std::string>();
    if (!m.feature_fingerprint.empty() && m.feature_fingerprint != m.feature_config.fingerprint()) {
      throw Error(Errc::schema_mismatch, "feature_config does not match its fingerprint");
    }

    const auto& layers = doc.at("layers");
    const auto d = layers.at("input").get<std::size_t>();
    const auto h = layers.at("hidden").get<std::size_t>();
    const auto c = layers.at("output").get<std::size_t>();
    if (d == 0 || h == 0 || c < 2 || c != m.class_names.size()) {
      throw Error(Errc::schema_mismatch, "layer dims inconsistent with class names");
    }
    const auto& w = doc.at("weights");
    m.params.w1 = matrix_from_json(w.at("W1"), d, h, "W1");
    m.params.b1 = vector_from_json(w.at("b1"), h, "b1");
    m.params.w2 = matrix_from_json(w.at("W2"), h, c, "W2");
    m.params.b2 = vector_from_json(w.at("b2"), c, "b2");
    const auto& st = doc.at("standardization");
    m.standardizer.means = vector_from_json(st.at("means"), d, "standardization.means");
    m.standardizer.stds = vector_from_json(st.at("stds"), d, "standardization.stds");
    for (double s : m.standardizer.stds) {
      if (!(s > 0.0)) throw Error(Errc::schema_mismatch, "standardization stds must be positive");
    }
    if (doc.contains("split")) {
      const auto& sp = doc.at("split");
      m.split.train_fraction = sp.at("train_fraction").get<double>();
      m.split.seed = sp.at("seed").get<std::uint64_t>();
      m.split.stratified = sp.at("stratified").get<bool>();
    }
    if (doc.contains("train_config")) m.train_config = train_config_from_json(doc.at("train_config"));
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::schema_mismatch, std::string("model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() != Errc::invalid_params) throw;
    throw Error(Errc::schema_mismatch, std::string("model file: ") + e.what());
  }
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace genre
