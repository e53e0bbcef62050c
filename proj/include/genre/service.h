#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "genre/model.h"

namespace genre {

inline constexpr std::size_t kDefaultMaxBodyBytes = 15u * 1024u * 1024u;
inline constexpr std::size_t kDefaultListLimit = 50;
inline constexpr std::size_t kMaxListLimit = 1000;

struct ClassificationRecord {
  std::string id;
  std::string created_at;
  std::string content_hash;
  std::string predicted_genre;
  std::vector<std::pair<std::string, double>> probabilities;  // class-name order
  std::string model_version;

  /// Single-line JSON document.
  std::string to_json() const;
  /// Throws Errc::parse_error / Errc::schema_mismatch.
  static ClassificationRecord from_json(const std::string& line);
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string new_uuid_v4();
std::string utc_timestamp_rfc3339();

/// Append-only JSON-Lines record file with an in-memory index. Appends are
/// serialized and fsync'd; lookups share a reader lock.
class RecordStore {
 public:
  /// Opens (creating if needed) and indexes the file. A torn final line left
  /// by an interrupted append is truncated away.
  explicit RecordStore(const std::filesystem::path& path);
  ~RecordStore();
  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  /// Persists the record and returns the exact line stored (without newline).
  std::string append(const ClassificationRecord& record);
  std::optional<std::string> find(const std::string& id) const;
  /// Most recent first, optionally filtered by predicted genre.
  std::vector<std::string> list(const std::optional<std::string>& genre, std::size_t limit) const;
  std::size_t size() const;
  void flush();

 private:
  struct Entry {
    std::string id;
    std::string genre;
    std::string line;
  };
  void index_line(std::string line);

  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex append_mutex_;
  mutable std::shared_mutex index_mutex_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct ServiceConfig {
  std::filesystem::path model_path;
  std::filesystem::path store_path;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  int worker_threads = 16;
};

/// HTTP front end: POST /v1/classify, GET /v1/results/{id},
/// GET /v1/results?genre=&limit=, GET /v1/health.
class Service {
 public:
  Service(ServiceConfig config, Model model);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the bound port. Throws
  /// Errc::io_error when binding fails.
  int bind();
  /// Serves until stop(). Requires bind().
  void run();
  void stop();
  int port() const;
  const Model& model() const;
  RecordStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace genre
