#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coiner/model_io.hpp"
#include "json.hpp"

namespace coiner::server {

struct ClassifiedSpan {
  std::string text;
  // Code-point offsets into the submitted text, end exclusive.
  std::size_t start = 0;
  std::size_t end = 0;
  // Byte offsets of the same range.
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  std::string label;
  double confidence = 0.0;

  bool operator==(const ClassifiedSpan&) const = default;
};

struct CoinReport {
  std::string source;
  std::string generated_at;
  std::vector<std::string> classes;
  std::vector<ClassifiedSpan> entries;
  nlohmann::json provenance;

  bool operator==(const CoinReport&) const = default;
};

enum class FeedbackAction { Update, Remove };

std::string_view to_string(FeedbackAction a);
std::optional<FeedbackAction> parse_feedback_action(std::string_view s);

struct FeedbackRecord {
  std::string sentence;
  std::string predicted;
  // Empty for removals that carry no correction.
  std::string corrected;
  FeedbackAction action = FeedbackAction::Update;
  std::string timestamp;
  std::string client;

  bool operator==(const FeedbackRecord&) const = default;
};

// Throws Error(Validation) for unknown class names, an empty sentence, or an
// update whose corrected class equals the predicted one.
void validate(const FeedbackRecord& rec);

nlohmann::ordered_json to_json(const ClassifiedSpan& s);
nlohmann::ordered_json to_json(const CoinReport& r);
nlohmann::ordered_json to_json(const FeedbackRecord& r);
CoinReport report_from_json(const nlohmann::json& j);
FeedbackRecord feedback_from_json(const nlohmann::json& j);

// Standalone printable page, no external assets.
std::string render_report_html(const CoinReport& r);

// Append-only JSONL file; appends are serialized by a mutex and flushed
// before returning.
class FeedbackStore {
 public:
  explicit FeedbackStore(std::filesystem::path path);

  // Throws Error(Persistence) when the write fails.
  void append(const FeedbackRecord& rec);
  std::vector<FeedbackRecord> read_all() const;
  std::size_t count() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

std::string utc_timestamp();

// Request handling over an immutable model.
class Service {
 public:
  // model may be null; classification then raises ServiceUnavailable.
  Service(std::shared_ptr<const ModelBundle> model, std::shared_ptr<FeedbackStore> feedback,
          std::function<std::string()> clock = utc_timestamp);

  // Label names accepted in filters, for the model's granularity.
  std::vector<std::string> class_names() const;

  // An absent filter means every class. Throws Error(Argument) for empty text
  // and Error(Validation) for unknown class names.
  std::vector<ClassifiedSpan> classify_text(
      std::string_view text, const std::optional<std::set<std::string>>& classes = {}) const;
  CoinReport generate_report(std::string_view text,
                             const std::optional<std::set<std::string>>& classes,
                             std::string source) const;
  // Fills a missing timestamp; throws Error(Validation) or Error(Persistence).
  FeedbackRecord record_feedback(FeedbackRecord rec) const;

  nlohmann::json health() const;
  bool has_model() const { return model_ != nullptr; }
  const ModelBundle& model() const;
  FeedbackStore* feedback() const { return feedback_.get(); }

 private:
  std::shared_ptr<const ModelBundle> model_;
  std::shared_ptr<FeedbackStore> feedback_;
  std::function<std::string()> clock_;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_path;
  std::filesystem::path feedback_path = "feedback.jsonl";
  // Origins allowed cross-origin access; "*" allows any.
  std::vector<std::string> cors_origins = {"http://localhost:5173", "http://127.0.0.1:5173"};
  bool enable_fetch_proxy = true;
  std::size_t max_body_bytes = 4 * 1024 * 1024;

  // Applies COINER_MODEL, COINER_FEEDBACK and COINER_PORT when set.
  void apply_environment();
};

// HTTP/JSON front end. Routes live under /v1 with unversioned aliases:
// GET /health, POST /classify, /report, /feedback, /fetch.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<Service> service, ServerConfig config);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the socket; throws Error(Io) on failure. Returns the bound port.
  int bind();
  // Blocks until stop() is called.
  void run();
  void stop();
  int port() const { return port_; }
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<Service> service_;
  ServerConfig config_;
  int port_ = 0;
};

// Loads the model (Error(Persistence) / Error(Io) on failure) and builds the
// service described by config.
std::shared_ptr<Service> make_service(const ServerConfig& config);

}  // namespace coiner::server
