#include "genre/service.h"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

// Clients such as `curl --data-binary` label raw uploads as form data; the
// overall body cap is enforced by set_payload_max_length instead.
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (static_cast<std::size_t>(-1))
#include <httplib.h>
#include <json.hpp>

#include "genre/error.h"
#include "genre/inference.h"

namespace genre {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string error_body(const std::string& code, const std::string& message) {
  ordered_json j = {{"error", {{"code", code}, {"message", message}}}};
  return j.dump();
}

void write_all(int fd, const char* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::write(fd, data, len);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io_error, std::string("record store write failed: ") + std::strerror(errno));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string ClassificationRecord::to_json() const {
  ordered_json probs = ordered_json::object();
  for (const auto& [name, p] : probabilities) probs[name] = p;
  ordered_json j = {{"id", id},
                    {"created_at", created_at},
                    {"content_hash", content_hash},
                    {"predicted_genre", predicted_genre},
                    {"probabilities", probs},
                    {"model_version", model_version}};
  return j.dump();
}

ClassificationRecord ClassificationRecord::from_json(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("record is not valid JSON: ") + e.what());
  }
  try {
    ClassificationRecord r;
    r.id = j.at("id").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.content_hash = j.at("content_hash").get<std::string>();
    r.predicted_genre = j.at("predicted_genre").get<std::string>();
    for (const auto& [name, p] : j.at("probabilities").items()) r.probabilities.emplace_back(name, p.get<double>());
    r.model_version = j.at("model_version").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema_mismatch, std::string("record: ") + e.what());
  }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io_error, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string new_uuid_v4() {
  static std::mutex mutex;
  static std::mt19937_64 engine{[] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }()};
  std::uint64_t hi;
  std::uint64_t lo;
  {
    std::lock_guard lock(mutex);
    hi = engine();
    lo = engine();
  }
  hi = (hi & 0xFFFFFFFFFFFF0FFFull) | 0x0000000000004000ull;  // version 4
  lo = (lo & 0x3FFFFFFFFFFFFFFFull) | 0x8000000000000000ull;  // RFC 4122 variant
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx", static_cast<unsigned long long>(hi >> 32),
                static_cast<unsigned long long>((hi >> 16) & 0xFFFF), static_cast<unsigned long long>(hi & 0xFFFF),
                static_cast<unsigned long long>(lo >> 48), static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFull));
  return buf;
}

std::string utc_timestamp_rfc3339() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(millis));
  return buf;
}

RecordStore::RecordStore(const std::filesystem::path& path) : path_(path) {
  std::string content;
  {
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      content = ss.str();
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::io_error, "cannot open record store " + path_.string() + ": " + std::strerror(errno));

  const auto last_newline = content.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < content.size()) {
    std::cerr << "record store: dropping torn trailing line in " << path_ << '\n';
    if (::ftruncate(fd_, static_cast<off_t>(complete)) != 0) {
      throw Error(Errc::io_error, "cannot truncate torn record store tail");
    }
    content.resize(complete);
  }

  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      index_line(line);
    } catch (const Error& e) {
      std::cerr << "record store: skipping line " << line_no << ": " << e.what() << '\n';
    }
  }
}

RecordStore::~RecordStore() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void RecordStore::index_line(std::string line) {
  const auto rec = ClassificationRecord::from_json(line);
  std::unique_lock lock(index_mutex_);
  by_id_[rec.id] = entries_.size();
  entries_.push_back({rec.id, rec.predicted_genre, std::move(line)});
}

std::string RecordStore::append(const ClassificationRecord& record) {
  std::string line = record.to_json();
  std::lock_guard lock(append_mutex_);
  const std::string framed = line + "\n";
  write_all(fd_, framed.data(), framed.size());
  if (::fsync(fd_) != 0) throw Error(Errc::io_error, std::string("fsync failed: ") + std::strerror(errno));
  {
    std::unique_lock index_lock(index_mutex_);
    by_id_[record.id] = entries_.size();
    entries_.push_back({record.id, record.predicted_genre, line});
  }
  return line;
}

std::optional<std::string> RecordStore::find(const std::string& id) const {
  std::shared_lock lock(index_mutex_);
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return entries_[it->second].line;
}

std::vector<std::string> RecordStore::list(const std::optional<std::string>& genre, std::size_t limit) const {
  std::shared_lock lock(index_mutex_);
  std::vector<std::string> out;
  for (auto it = entries_.rbegin(); it != entries_.rend() && out.size() < limit; ++it) {
    if (!genre || it->genre == *genre) out.push_back(it->line);
  }
  return out;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(index_mutex_);
  return entries_.size();
}

void RecordStore::flush() {
  std::lock_guard lock(append_mutex_);
  ::fsync(fd_);
}

struct Service::Impl {
  ServiceConfig config;
  Model model;
  RecordStore store;
  httplib::Server server;
  int bound_port = -1;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  Impl(ServiceConfig cfg, Model m) : config(std::move(cfg)), model(std::move(m)), store(config.store_path) {
    const int threads = config.worker_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    server.set_payload_max_length(config.max_body_bytes);
    routes();
  }

  void routes() {
    server.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) { classify(req, res); });
    server.Get(R"(/v1/results/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto rec = store.find(req.matches[1].str());
      if (!rec) {
        res.status = 404;
        res.set_content(error_body("not_found", "no record with that id"), "application/json");
        return;
      }
      res.set_content(*rec, "application/json");
    });
    server.Get("/v1/results", [this](const httplib::Request& req, httplib::Response& res) { list(req, res); });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      const double uptime =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      ordered_json j = {{"status", "ok"}, {"model_version", model.model_version}, {"uptime_seconds", uptime}};
      res.set_content(j.dump(), "application/json");
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const char* code = res.status == 413 ? "payload_too_large" : res.status == 404 ? "not_found" : "http_error";
      res.set_content(error_body(code, httplib::status_message(res.status)), "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(error_body("internal", what), "application/json");
    });
  }

  void classify(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) {
      res.status = 400;
      res.set_content(error_body("malformed_audio", "request body is empty"), "application/json");
      return;
    }
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(req.body.data()),
                                              req.body.size());
    ClipPrediction pred;
    try {
      pred = classify_audio(model, bytes);
    } catch (const Error& e) {
      const bool too_short = e.code() == Errc::too_short;
      const bool decode = e.code() == Errc::malformed_header || e.code() == Errc::unsupported_format ||
                          e.code() == Errc::truncated_data || e.code() == Errc::invalid_params;
      if (!too_short && !decode) throw;
      res.status = 400;
      res.set_content(error_body(too_short ? "audio_too_short" : "malformed_audio", e.what()), "application/json");
      return;
    }
    ClassificationRecord rec;
    rec.id = new_uuid_v4();
    rec.created_at = utc_timestamp_rfc3339();
    rec.content_hash = sha256_hex(bytes);
    rec.predicted_genre = pred.genre;
    for (std::size_t c = 0; c < model.class_names.size(); ++c) {
      rec.probabilities.emplace_back(model.class_names[c], pred.probs[c]);
    }
    rec.model_version = model.model_version;
    res.set_content(store.append(rec), "application/json");
  }

  void list(const httplib::Request& req, httplib::Response& res) {
    std::size_t limit = kDefaultListLimit;
    if (req.has_param("limit")) {
      const std::string raw = req.get_param_value("limit");
      long long value = 0;
      const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
      if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size() || value < 0) {
        res.status = 400;
        res.set_content(error_body("invalid_limit", "limit must be a non-negative integer"), "application/json");
        return;
      }
      limit = std::min<std::size_t>(static_cast<std::size_t>(value), kMaxListLimit);
    }
    std::optional<std::string> genre;
    if (req.has_param("genre")) genre = req.get_param_value("genre");
    std::string body = "[";
    const auto lines = store.list(genre, limit);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i > 0) body += ",";
      body += lines[i];
    }
    body += "]";
    res.set_content(body, "application/json");
  }
};

Service::Service(ServiceConfig config, Model model)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(model))) {}

Service::~Service() { stop(); }

int Service::bind() {
  const int port = impl_->config.port == 0 ? impl_->server.bind_to_any_port(impl_->config.host)
                                           : (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)
                                                  ? impl_->config.port
                                                  : -1);
  if (port < 0) {
    throw Error(Errc::io_error, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  impl_->bound_port = port;
  return port;
}

void Service::run() {
  if (impl_->bound_port < 0) throw Error(Errc::invalid_params, "Service::run before bind");
  impl_->server.listen_after_bind();
  impl_->store.flush();
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

int Service::port() const { return impl_->bound_port; }

const Model& Service::model() const { return impl_->model; }

RecordStore& Service::store() { return impl_->store; }

}  // namespace genre
