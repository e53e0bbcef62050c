#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <numeric>

#include "genre/model.h"
#include "test_support.h"

using namespace genre;
using namespace genre::testing;

namespace {

/// Two well separated Gaussian-ish blobs in d dimensions.
Dataset blobs(std::size_t n, std::size_t d, std::uint64_t seed, double offset = 2.0) {
  std::mt19937_64 gen(seed);
  Dataset ds;
  ds.X = Matrix(n, d);
  ds.class_names = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.y.push_back(label);
    ds.filenames.push_back("f" + std::to_string(i));
    for (std::size_t j = 0; j < d; ++j) ds.X(i, j) = (label == 0 ? -offset : offset) + uniform(gen, -1, 1);
  }
  return ds;
}

std::vector<double> onehot(std::size_t c, std::size_t k) {
  std::vector<double> y(c, 0.0);
  y[k] = 1.0;
  return y;
}

double loss_at(const MlpParams& p, const std::vector<double>& x, const std::vector<double>& y) {
  return loss_ce(forward(p, x).probs, y);
}

}  // namespace

TEST_CASE("initialization") {
  const auto a = init_params(20, 10, 42);
  const auto b = init_params(20, 10, 42);
  const auto c = init_params(20, 10, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.input_dim() == 20);
  CHECK(a.hidden_dim() == 256);
  CHECK(a.output_dim() == 10);
  for (double v : a.b1) CHECK(v == 0.0);
  for (double v : a.b2) CHECK(v == 0.0);
  const double lim1 = std::sqrt(6.0 / (20 + 256));
  const double lim2 = std::sqrt(6.0 / (256 + 10));
  double sq = 0.0;
  for (double v : a.w1.data()) {
    CHECK(std::abs(v) <= lim1);
    sq += v * v;
  }
  // Uniform(-L, L) has variance L^2 / 3.
  CHECK(sq / static_cast<double>(a.w1.data().size()) == doctest::Approx(lim1 * lim1 / 3.0).epsilon(0.1));
  for (double v : a.w2.data()) CHECK(std::abs(v) <= lim2);
}

TEST_CASE("softmax and forward") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(7);
    for (auto& v : logits) v = uniform(gen, -50, 50);
    const auto p = softmax(logits);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    auto shifted = logits;
    for (auto& v : shifted) v += 123.0;
    const auto q = softmax(shifted);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(q[k] == doctest::Approx(p[k]).epsilon(1e-12));
  }
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(big[0] == 1.0);
  CHECK(std::isfinite(big[1]));

  const auto zero = MlpParams::zeros(5, 8, 4);
  const auto out = forward(zero, std::vector<double>{1, 2, 3, 4, 5});
  for (double p : out.probs) CHECK(p == 0.25);
  CHECK_ERRC(forward(zero, std::vector<double>{1, 2}), Errc::dimension_mismatch);

  // Dropout mask zeroes hidden units and rescales the survivors.
  auto p = init_params(3, 2, 5, 4);
  std::fill(p.b1.begin(), p.b1.end(), 1.0);
  const std::vector<double> x{0.0, 0.0, 0.0};
  const auto dropped = forward(p, x, std::vector<double>{1, 0, 1, 0}, 0.5);
  CHECK(dropped.hidden == std::vector<double>{2.0, 0.0, 2.0, 0.0});
}

TEST_CASE("cross-entropy") {
  CHECK(loss_ce(std::vector<double>(10, 0.1), onehot(10, 3)) == doctest::Approx(std::log(10.0)).epsilon(1e-9));
  CHECK(loss_ce(std::vector<double>{1.0, 0.0}, onehot(2, 0)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-11));
  CHECK(std::isfinite(loss_ce(std::vector<double>{1.0, 0.0}, onehot(2, 1))));
  CHECK(loss_ce(std::vector<double>{1.0, 0.0}, onehot(2, 1)) == doctest::Approx(-std::log(kLossEps)));
}

TEST_CASE("gradient check against central differences") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = init_params(6, 3, 100 + static_cast<std::uint64_t>(trial), 8);
    for (auto& v : p.b1) v = uniform(gen, -0.5, 0.5);
    for (auto& v : p.b2) v = uniform(gen, -0.5, 0.5);
    std::vector<double> x(6);
    for (auto& v : x) v = uniform(gen, -2, 2);
    const auto y = onehot(3, gen() % 3);
    const auto g = backward(p, forward(p, x), y);

    auto check_block = [&](std::vector<double>& theta, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double h = 1e-6;
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = loss_at(p, x, y);
        theta[i] = saved - h;
        const double down = loss_at(p, x, y);
        theta[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
        CHECK_MESSAGE(std::abs(numeric - grad[i]) / denom <= 1e-4, "numeric " << numeric << " analytic " << grad[i]);
      }
    };
    check_block(p.w1.data(), g.w1.data());
    check_block(p.b1, g.b1);
    check_block(p.w2.data(), g.w2.data());
    check_block(p.b2, g.b2);
  }
}

TEST_CASE("backward reuses the dropout mask") {
  const auto p = init_params(4, 3, 9, 6);
  const std::vector<double> x{0.3, -1.2, 0.8, 2.0};
  const std::vector<double> mask{1, 0, 1, 1, 0, 1};
  const auto cache = forward(p, x, mask, 0.4);
  const auto g = backward(p, cache, onehot(3, 1));
  for (std::size_t j = 0; j < 6; ++j) {
    if (mask[j] == 0.0) {
      CHECK(g.b1[j] == 0.0);
      for (std::size_t k = 0; k < 3; ++k) CHECK(g.w2(j, k) == 0.0);
    }
  }
}

TEST_CASE("Adam scalar trajectory") {
  TrainConfig cfg;
  std::vector<double> theta{1.0};
  std::vector<double> m{0.0};
  std::vector<double> v{0.0};
  // Extended-precision reference values for gradients 0.5, -0.2, 1.5.
  const double want[] = {0.999000000199999960000008, 0.9986543944428643296927395, 0.9979628939473286990581021};
  const double grads[] = {0.5, -0.2, 1.5};
  for (std::uint64_t t = 1; t <= 3; ++t) {
    adam_update(theta, std::vector<double>{grads[t - 1]}, m, v, t, cfg);
    CHECK(std::abs(theta[0] - want[t - 1]) <= 1e-12);
  }

  // First step moves each parameter by about lr against the gradient sign.
  auto p = init_params(3, 2, 1, 4);
  const auto before = p;
  MlpParams g = MlpParams::zeros(3, 4, 2);
  for (auto& x : g.w1.data()) x = 0.7;
  g.b2 = {-3.0, 0.0};
  AdamState state = AdamState::zeros_like(p);
  adam_step(p, g, state, cfg);
  CHECK(state.t == 1);
  for (std::size_t i = 0; i < p.w1.data().size(); ++i) {
    CHECK(before.w1.data()[i] - p.w1.data()[i] == doctest::Approx(0.001).epsilon(1e-6));
  }
  CHECK(p.b2[0] - before.b2[0] == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(p.b2[1] == before.b2[1]);  // zero gradient leaves the parameter alone
  CHECK(p.w2 == before.w2);
}

TEST_CASE("standardizer") {
  const auto ds = blobs(200, 5, 3, 10.0);
  std::vector<std::size_t> rows(200);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto s = Standardizer::fit(ds.X, rows);
  std::vector<double> mean(5, 0.0);
  std::vector<double> var(5, 0.0);
  for (std::size_t r = 0; r < 200; ++r) {
    const auto z = s.apply(ds.X.row(r));
    for (std::size_t j = 0; j < 5; ++j) mean[j] += z[j] / 200.0;
  }
  for (std::size_t r = 0; r < 200; ++r) {
    const auto z = s.apply(ds.X.row(r));
    for (std::size_t j = 0; j < 5; ++j) var[j] += (z[j] - mean[j]) * (z[j] - mean[j]) / 200.0;
  }
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::abs(mean[j]) < 1e-9);
    CHECK(std::abs(var[j] - 1.0) < 1e-6);
  }
  Matrix constant(4, 1, 3.0);
  const auto c = Standardizer::fit(constant, {0, 1, 2, 3});
  CHECK(c.stds[0] == 1.0);
  CHECK(c.apply(std::vector<double>{3.0})[0] == 0.0);
}

TEST_CASE("full-batch training loss is non-increasing") {
  const auto ds = blobs(40, 4, 8);
  TrainConfig cfg;
  cfg.batch_size = 40;
  cfg.dropout_rate = 0.0;
  cfg.val_fraction = 0.0;
  cfg.epochs = 5;
  cfg.hidden_units = 16;
  const auto res = train(ds, cfg);
  REQUIRE(res.history.epochs.size() == 5);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& e : res.history.epochs) {
    CHECK(e.train_loss <= prev);
    CHECK(std::isnan(e.val_loss));
    prev = e.train_loss;
  }
}

TEST_CASE("training is deterministic and learns separable data") {
  const auto ds = blobs(60, 6, 2);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 10;
  cfg.hidden_units = 32;
  const auto a = train(ds, cfg);
  const auto b = train(ds, cfg);
  CHECK(model_to_json(a.model) == model_to_json(b.model));
  CHECK(a.history.epochs.back().train_acc == 1.0);
  CHECK(a.history.epochs.back().val_acc == 1.0);

  auto bad = cfg;
  bad.dropout_rate = 1.0;
  CHECK_ERRC(train(ds, bad), Errc::invalid_params);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_ERRC(train(ds, bad), Errc::invalid_params);

  const auto wider = blobs(60, 7, 2);
  CHECK_ERRC(train(wider, cfg, &a.model), Errc::dimension_mismatch);
}

TEST_CASE("predict") {
  const auto ds = blobs(40, 3, 4);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.hidden_units = 16;
  const auto res = train(ds, cfg);
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto p1 = predict(res.model, x);
  const auto p2 = predict(res.model, x);
  CHECK(p1.probs == p2.probs);
  CHECK(p1.label == std::max_element(p1.probs.begin(), p1.probs.end()) - p1.probs.begin());
  CHECK_ERRC(predict(res.model, std::vector<double>{1.0}), Errc::dimension_mismatch);
}

TEST_CASE("model persistence") {
  TempDir dir;
  const auto ds = blobs(40, 5, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden_units = 12;
  auto model = train(ds, cfg).model;
  model.feature_fingerprint = model.feature_config.fingerprint();
  model.model_version = compute_model_version(model);
  save_model(model, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK(back.params == model.params);
  CHECK(back.standardizer == model.standardizer);
  CHECK(back.class_names == model.class_names);
  CHECK(back.model_version == model.model_version);

  std::mt19937_64 gen(3);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = uniform(gen, -5, 5);
    CHECK(predict(back, x).probs == predict(model, x).probs);
  }
  save_model(back, dir / "again.json");
  CHECK(read_text(dir / "again.json") == read_text(dir / "m.json"));

  const auto text = model_to_json(model);
  auto doc = nlohmann::json::parse(text);
  CHECK(doc.at("format_version") == kModelFormatVersion);

  auto corrupt = doc;
  corrupt["layers"]["input"] = 6;
  CHECK_ERRC(model_from_json(corrupt.dump()), Errc::schema_mismatch);
  corrupt = doc;
  corrupt["weights"]["b1"].erase(0);
  CHECK_ERRC(model_from_json(corrupt.dump()), Errc::schema_mismatch);
  corrupt = doc;
  corrupt["weights"]["W2"] = "nope";
  CHECK_ERRC(model_from_json(corrupt.dump()), Errc::schema_mismatch);
  corrupt = doc;
  corrupt["format_version"] = kModelFormatVersion + 1;
  CHECK_ERRC(model_from_json(corrupt.dump()), Errc::version_mismatch);
  corrupt = doc;
  corrupt["feature_config"]["n_mels"] = 64;
  CHECK_ERRC(model_from_json(corrupt.dump()), Errc::schema_mismatch);
  CHECK_ERRC(model_from_json("{not json"), Errc::parse_error);
  CHECK_ERRC(load_model(dir / "missing.json"), Errc::io_error);

  auto changed = model;
  changed.params.b2[0] += 1e-9;
  CHECK(compute_model_version(changed) != compute_model_version(model));
}
