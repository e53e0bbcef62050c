// genre: extract -> train -> evaluate pipeline, single-file classification,
// report rendering and the HTTP service.

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "genre/audio_io.h"
#include "genre/dataset.h"
#include "genre/error.h"
#include "genre/eval.h"
#include "genre/features.h"
#include "genre/inference.h"
#include "genre/model.h"
#include "genre/run_config.h"
#include "genre/service.h"

#ifndef GENRE_VERSION
#define GENRE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace genre;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitSchema = 4;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_params:
      return kExitUsage;
    case Errc::io_error:
    case Errc::malformed_header:
    case Errc::unsupported_format:
    case Errc::truncated_data:
    case Errc::empty_dataset:
    case Errc::too_short:
      return kExitIo;
    default:
      return kExitSchema;
  }
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string file_sha256(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return sha256_hex(bytes);
}

/// Defaults, then the config file, then the feature manifest beside `csv`
/// for the [features] section (the cache is authoritative about how it was
/// made).
RunConfig base_config(const std::string& config_path) {
  RunConfig cfg;
  if (!config_path.empty()) apply_ini(cfg, IniFile::load(config_path));
  return cfg;
}

struct FeatureProvenance {
  bool from_manifest = false;
  std::string fingerprint;
};

FeatureProvenance adopt_feature_manifest(RunConfig& cfg, const fs::path& csv) {
  FeatureProvenance prov;
  const auto manifest = manifest_path_for(csv);
  if (!fs::exists(manifest)) return prov;
  const IniFile ini = IniFile::load(manifest);
  IniFile features_only;
  if (ini.sections().count("features")) {
    for (const auto& [k, v] : ini.sections().at("features")) features_only.set("features", k, v);
  }
  try {
    cfg.features = FeatureConfig{};
    apply_ini(cfg, features_only);
    cfg.features.validate();
  } catch (const Error& e) {
    throw Error(Errc::schema_mismatch, manifest.string() + ": " + e.what());
  }
  prov.from_manifest = true;
  prov.fingerprint = cfg.features.fingerprint();
  if (const auto* recorded = ini.get("run", "feature_fingerprint"); recorded && *recorded != prov.fingerprint) {
    throw Error(Errc::schema_mismatch, manifest.string() + ": feature fingerprint does not match its settings");
  }
  return prov;
}

std::size_t expected_dim(const RunConfig& cfg) {
  return cfg.mode == FeatureMode::mfcc_mean ? cfg.features.n_mfcc : extended_feature_names(cfg.features).size();
}

std::vector<std::pair<std::string, std::string>> run_header(const std::string& command) {
  return {{"command", command}, {"tool_version", GENRE_VERSION}, {"model_format_version", std::to_string(kModelFormatVersion)}};
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string data;
  std::string out;
  std::string mode;
  std::string config;
  unsigned jobs = 0;
  bool skip_bad = false;
};

int run_extract(const ExtractArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  RunConfig cfg = base_config(a.config);
  if (!a.mode.empty()) cfg.mode = parse_feature_mode(a.mode);
  cfg.validate();

  const auto clips = scan_gtzan(a.data);
  const unsigned jobs = std::max(1u, a.jobs == 0 ? std::thread::hardware_concurrency() : a.jobs);

  std::vector<std::optional<ClipFeatureVector>> results(clips.size());
  std::vector<std::string> failures(clips.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < clips.size(); i = next++) {
      try {
        const AudioBuffer raw = read_wav_file(clips[i].path);
        results[i] = clip_features(resample(raw, cfg.features.sample_rate_hz), cfg.features, cfg.mode);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(jobs, clips.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t bad = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (results[i]) continue;
    ++bad;
    std::cerr << (a.skip_bad ? "skipping " : "error: ") << clips[i].path.string() << ": " << failures[i] << '\n';
  }
  if (bad > 0 && !a.skip_bad) {
    std::cerr << bad << " file(s) could not be processed; rerun with --skip-bad to ignore them\n";
    return kExitIo;
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (results[i]) kept.push_back(i);
  }
  if (kept.empty()) throw Error(Errc::empty_dataset, "no audio files could be processed under " + a.data);

  std::vector<std::string> genres;
  for (std::size_t i : kept) genres.push_back(clips[i].genre);
  auto enc = encode_labels(genres);
  Dataset ds;
  ds.X = Matrix(kept.size(), results[kept.front()]->values.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const auto& v = results[kept[r]]->values;
    std::copy(v.begin(), v.end(), ds.X.row(r).begin());
    ds.filenames.push_back(fs::relative(clips[kept[r]].path, a.data).generic_string());
  }
  ds.y = std::move(enc.y);
  ds.class_names = std::move(enc.class_names);
  ds.feature_mode = cfg.mode;
  ds.config_fingerprint = cfg.features.fingerprint();
  save_features(ds, a.out);

  auto header = run_header("extract");
  header.emplace_back("data_root", a.data);
  header.emplace_back("rows", std::to_string(ds.size()));
  header.emplace_back("skipped", std::to_string(bad));
  header.emplace_back("columns", std::to_string(ds.dim()));
  write_text_file(manifest_path_for(a.out), make_manifest(cfg, header).render());

  std::map<std::string, std::size_t> per_genre;
  for (const auto& g : genres) ++per_genre[g];
  for (const auto& [g, n] : per_genre) std::cout << g << '\t' << n << '\n';
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::cout << "extracted " << ds.size() << " clips x " << ds.dim() << " features (" << feature_mode_name(cfg.mode)
            << ") in " << fmt("%.2f", elapsed) << " s -> " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string features;
  std::string out;
  std::string config;
  std::string history;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> hidden_units;
  std::optional<double> learning_rate;
  std::optional<double> dropout;
  std::optional<double> val_fraction;
  std::optional<double> train_fraction;
  std::string split_kind;
};

/// Loads a feature cache and checks it against the manifest-derived config.
Dataset load_checked_features(const fs::path& csv, RunConfig& cfg, FeatureProvenance& prov) {
  prov = adopt_feature_manifest(cfg, csv);
  Dataset ds = load_features(csv);
  if (prov.from_manifest) {
    const IniFile ini = IniFile::load(manifest_path_for(csv));
    if (const auto* mode = ini.get("features", "mode")) cfg.mode = parse_feature_mode(*mode);
  } else {
    // No manifest: the column count decides between the two default layouts.
    RunConfig guess;
    guess.mode = FeatureMode::extended;
    cfg.mode = ds.dim() == expected_dim(guess) ? FeatureMode::extended : FeatureMode::mfcc_mean;
    prov.fingerprint = cfg.features.fingerprint();
    std::cerr << "warning: no manifest beside " << csv.string() << "; assuming default " << feature_mode_name(cfg.mode)
              << " settings\n";
  }
  if (ds.dim() != expected_dim(cfg)) {
    throw Error(Errc::schema_mismatch, csv.string() + " has " + std::to_string(ds.dim()) + " feature columns, " +
                                           std::string(feature_mode_name(cfg.mode)) + " expects " +
                                           std::to_string(expected_dim(cfg)));
  }
  ds.feature_mode = cfg.mode;
  ds.config_fingerprint = prov.fingerprint;
  return ds;
}

void write_history(const fs::path& path, const TrainHistory& h) {
  std::string text = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const auto& s = h.epochs[e];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", e + 1, s.train_loss, s.train_acc, s.val_loss, s.val_acc);
    text += buf;
  }
  write_text_file(path, text);
}

fs::path default_sidecar(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension(suffix);
  return p;
}

int run_train(const TrainArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  RunConfig cfg = base_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.split_seed) cfg.split.seed = *a.split_seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.hidden_units) cfg.train.hidden_units = *a.hidden_units;
  if (a.learning_rate) cfg.train.learning_rate = *a.learning_rate;
  if (a.dropout) cfg.train.dropout_rate = *a.dropout;
  if (a.val_fraction) cfg.train.val_fraction = *a.val_fraction;
  if (a.train_fraction) cfg.split.train_fraction = *a.train_fraction;
  if (!a.split_kind.empty()) cfg.split.stratified = a.split_kind == "stratified";
  cfg.validate();

  std::optional<Model> resume;
  if (!a.resume.empty()) resume = load_model(a.resume);

  FeatureProvenance prov;
  const Dataset ds = load_checked_features(a.features, cfg, prov);
  if (resume) {
    if (resume->input_dim() != ds.dim()) {
      throw Error(Errc::dimension_mismatch, "resumed model expects " + std::to_string(resume->input_dim()) +
                                                " features, cache has " + std::to_string(ds.dim()));
    }
    if (resume->feature_mode != cfg.mode || resume->feature_config.fingerprint() != prov.fingerprint) {
      throw Error(Errc::schema_mismatch, "resumed model was trained on differently extracted features");
    }
  }

  const auto [train_part, test_part] = split(ds, cfg.split);
  TrainResult result = train(train_part, cfg.train, resume ? &*resume : nullptr);
  Model& model = result.model;
  model.feature_mode = cfg.mode;
  model.feature_config = cfg.features;
  model.feature_fingerprint = prov.fingerprint;
  model.split = cfg.split;
  model.model_version = compute_model_version(model);
  save_model(model, a.out);

  const fs::path history = a.history.empty() ? default_sidecar(a.out, ".history.csv") : fs::path(a.history);
  write_history(history, result.history);

  auto header = run_header("train");
  header.emplace_back("features_csv", a.features);
  header.emplace_back("features_sha256", file_sha256(a.features));
  header.emplace_back("model_path", a.out);
  header.emplace_back("model_version", model.model_version);
  header.emplace_back("history_csv", history.string());
  header.emplace_back("train_rows", std::to_string(train_part.size()));
  header.emplace_back("test_rows", std::to_string(test_part.size()));
  if (!a.resume.empty()) header.emplace_back("resumed_from", a.resume);
  write_text_file(manifest_path_for(a.out), make_manifest(cfg, header).render());

  const auto& last = result.history.epochs.empty() ? EpochStats{} : result.history.epochs.back();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::cout << "trained " << model.model_version << " on " << train_part.size() << " rows in "
            << fmt("%.2f", elapsed) << " s\n"
            << "final train_acc " << fmt("%.4f", last.train_acc) << " val_acc "
            << (std::isnan(last.val_loss) ? std::string("n/a") : fmt("%.4f", last.val_acc)) << '\n';
  return kExitOk;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string features;
  std::string model;
  std::string split = "test";
  std::string report_path;
  std::string confusion_path;
  std::string matrix_path;
};

int run_evaluate(const EvaluateArgs& a) {
  const Model model = load_model(a.model);
  RunConfig cfg;
  FeatureProvenance prov;
  const Dataset ds = load_checked_features(a.features, cfg, prov);
  if (ds.dim() != model.input_dim()) {
    throw Error(Errc::dimension_mismatch, "model expects " + std::to_string(model.input_dim()) +
                                              " features, cache has " + std::to_string(ds.dim()));
  }
  if (prov.from_manifest && (cfg.mode != model.feature_mode || prov.fingerprint != model.feature_fingerprint)) {
    throw Error(Errc::schema_mismatch, "feature cache was extracted with settings the model was not trained on");
  }

  std::vector<std::size_t> rows;
  if (a.split == "all") {
    rows.resize(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    const auto idx = split_indices(ds, model.split);
    rows = a.split == "test" ? idx.test : idx.train;
  }

  std::vector<int> remap(ds.class_names.size(), -1);
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    const auto it = std::find(model.class_names.begin(), model.class_names.end(), ds.class_names[c]);
    if (it != model.class_names.end()) remap[c] = static_cast<int>(it - model.class_names.begin());
  }
  std::vector<int> y_true;
  std::vector<int> y_pred;
  for (std::size_t r : rows) {
    const int t = remap[static_cast<std::size_t>(ds.y[r])];
    if (t < 0) throw Error(Errc::schema_mismatch, "label '" + ds.class_names[ds.y[r]] + "' is unknown to the model");
    y_true.push_back(t);
    y_pred.push_back(predict(model, ds.X.row(r)).label);
  }
  const auto cm = confusion(y_true, y_pred, model.class_names.size(), model.class_names);
  const auto rep = report(cm);
  const std::string text = render_report_text(rep);
  std::cout << text;
  if (rep.has_zero_division()) std::cerr << "warning: some scores are ill-defined and were set to 0\n";

  if (!a.confusion_path.empty()) write_confusion_svg(cm, a.confusion_path);
  if (!a.matrix_path.empty()) write_text_file(a.matrix_path, confusion_to_csv(cm));
  if (!a.report_path.empty()) {
    write_text_file(a.report_path, text);
    RunConfig effective;
    effective.features = model.feature_config;
    effective.mode = model.feature_mode;
    effective.train = model.train_config;
    effective.split = model.split;
    auto header = run_header("evaluate");
    header.emplace_back("features_csv", a.features);
    header.emplace_back("features_sha256", file_sha256(a.features));
    header.emplace_back("model_path", a.model);
    header.emplace_back("model_version", model.model_version);
    header.emplace_back("split", a.split);
    header.emplace_back("rows", std::to_string(rows.size()));
    IniFile manifest = make_manifest(effective, header);
    manifest.set("result", "accuracy", fmt("%.6f", rep.accuracy));
    manifest.set("result", "macro_f1", fmt("%.6f", rep.macro.f1));
    manifest.set("result", "weighted_f1", fmt("%.6f", rep.weighted.f1));
    write_text_file(manifest_path_for(a.report_path), manifest.render());
  }
  return kExitOk;
}

// --------------------------------------------------------------- classify

int run_classify(const std::string& model_path, const std::vector<std::string>& files) {
  const Model model = load_model(model_path);
  std::size_t failed = 0;
  for (const auto& f : files) {
    try {
      const auto bytes = read_file_bytes(f);
      const auto pred = classify_audio(model, bytes);
      std::cout << f << '\t' << pred.genre << '\t' << fmt("%.6f", pred.probs[static_cast<std::size_t>(pred.label)])
                << '\n';
    } catch (const Error& e) {
      ++failed;
      std::cerr << f << ": " << e.what() << '\n';
    }
  }
  std::cout.flush();
  if (failed > 0) {
    std::cerr << failed << " of " << files.size() << " file(s) failed\n";
    return kExitIo;
  }
  return kExitOk;
}

// ----------------------------------------------------------------- report

int run_report(const std::string& matrix_path, const std::string& out, const std::string& svg) {
  std::ifstream in(matrix_path);
  if (!in) throw Error(Errc::io_error, "cannot read " + matrix_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto cm = confusion_from_csv(ss.str());
  const std::string text = render_report_text(report(cm));
  std::cout << text;
  if (!out.empty()) write_text_file(out, text);
  if (!svg.empty()) write_confusion_svg(cm, svg);
  return kExitOk;
}

// ------------------------------------------------------------------ serve

struct ServeArgs {
  std::string model;
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  int threads = 16;
};

int run_serve(const ServeArgs& a) {
  if (!fs::is_regular_file(a.model)) {
    std::cerr << "error: model file not found: " << a.model << '\n';
    return kExitUsage;
  }
  Model model;
  try {
    model = load_model(a.model);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Signals are taken synchronously on a dedicated thread; every other thread
  // inherits the blocked mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  ServiceConfig sc;
  sc.model_path = a.model;
  sc.store_path = a.store;
  sc.host = a.host;
  sc.port = a.port;
  sc.max_body_bytes = a.max_body_bytes;
  sc.worker_threads = a.threads;
  Service service(sc, std::move(model));
  const int port = service.bind();
  std::cout << "listening on http://" << a.host << ':' << port << " model " << service.model().model_version
            << " records " << service.store().size() << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "received signal " << sig << ", shutting down\n";
    service.stop();
  });
  service.run();
  // run() can also return without a signal (listen failure); wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  service.store().flush();
  std::cout << "stopped; " << service.store().size() << " records in " << a.store << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Music genre classification pipeline"};
  app.set_version_flag("--version", GENRE_VERSION);
  app.require_subcommand(1);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract clip features from <root>/<genre>/*.wav into a CSV cache");
  extract->add_option("--data", ex.data, "Dataset root with one directory per genre")->required();
  extract->add_option("--out", ex.out, "Output feature CSV")->required();
  extract->add_option("--mode", ex.mode, "Feature set")->check(CLI::IsMember({"mfcc_mean", "extended"}));
  extract->add_option("--config", ex.config, "INI file with [features] overrides");
  extract->add_option("--jobs", ex.jobs, "Worker threads (0 = logical CPU count)");
  extract->add_flag("--skip-bad", ex.skip_bad, "Skip undecodable files instead of failing");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the MLP classifier on a feature cache");
  trn->add_option("--features", tr.features, "Feature CSV written by extract")->required();
  trn->add_option("--out", tr.out, "Output model JSON")->required();
  trn->add_option("--config", tr.config, "INI file with [train] and [split] overrides");
  trn->add_option("--history", tr.history, "History CSV (default: <out>.history.csv)");
  trn->add_option("--resume", tr.resume, "Continue from an existing model");
  trn->add_option("--seed", tr.seed, "Training seed (default 42)");
  trn->add_option("--split-seed", tr.split_seed, "Train/test split seed (default 42)");
  trn->add_option("--epochs", tr.epochs, "Epochs (default 20)");
  trn->add_option("--batch-size", tr.batch_size, "Mini-batch size (default 40)");
  trn->add_option("--hidden-units", tr.hidden_units, "Hidden layer width (default 256)");
  trn->add_option("--learning-rate", tr.learning_rate, "Adam step size (default 0.001)");
  trn->add_option("--dropout", tr.dropout, "Dropout rate (default 0.5)");
  trn->add_option("--val-fraction", tr.val_fraction, "Validation share of the training rows (default 0.1)");
  trn->add_option("--train-fraction", tr.train_fraction, "Train share of the train/test split (default 0.8)");
  trn->add_option("--split", tr.split_kind, "Split kind")->check(CLI::IsMember({"stratified", "random"}));

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a feature cache split");
  evaluate->add_option("--features", ev.features, "Feature CSV")->required();
  evaluate->add_option("--model", ev.model, "Model JSON")->required();
  evaluate->add_option("--split", ev.split, "Rows to score")->check(CLI::IsMember({"test", "train", "all"}));
  evaluate->add_option("--report", ev.report_path, "Write the text report here");
  evaluate->add_option("--confusion", ev.confusion_path, "Write the confusion heatmap SVG here");
  evaluate->add_option("--matrix", ev.matrix_path, "Write the confusion matrix CSV here");

  std::string cl_model;
  std::vector<std::string> cl_files;
  auto* classify = app.add_subcommand("classify", "Print <path>\\t<genre>\\t<top-prob> per WAV file");
  classify->add_option("--model", cl_model, "Model JSON")->required();
  classify->add_option("files", cl_files, "WAV files")->required();

  std::string rp_matrix;
  std::string rp_out;
  std::string rp_svg;
  auto* rep = app.add_subcommand("report", "Render the report and heatmap from a confusion matrix CSV");
  rep->add_option("--matrix", rp_matrix, "Confusion matrix CSV written by evaluate --matrix")->required();
  rep->add_option("--out", rp_out, "Write the text report here");
  rep->add_option("--svg", rp_svg, "Write the heatmap SVG here");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
  serve->add_option("--model", sv.model, "Model JSON")->required();
  serve->add_option("--store", sv.store, "JSON-Lines record store")->required();
  serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve->add_option("--port", sv.port, "TCP port (0 = ephemeral)")->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--max-body-bytes", sv.max_body_bytes, "Largest accepted upload")->capture_default_str();
  serve->add_option("--threads", sv.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*extract) return run_extract(ex);
    if (*trn) return run_train(tr);
    if (*evaluate) return run_evaluate(ev);
    if (*classify) return run_classify(cl_model, cl_files);
    if (*rep) return run_report(rp_matrix, rp_out, rp_svg);
    if (*serve) return run_serve(sv);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
