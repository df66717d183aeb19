#include "coiner/server.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "coiner/error.hpp"
#include "coiner/ingest.hpp"
#include "coiner/textproc.hpp"
#include "httplib.h"

namespace coiner::server {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(FeedbackAction a) {
  return a == FeedbackAction::Update ? "update" : "remove";
}

std::optional<FeedbackAction> parse_feedback_action(std::string_view s) {
  if (s == "update") return FeedbackAction::Update;
  if (s == "remove") return FeedbackAction::Remove;
  return std::nullopt;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

bool known_class_name(const std::string& name) {
  for (auto g : {Granularity::Seven, Granularity::Two}) {
    const auto names = label_names(g);
    if (std::find(names.begin(), names.end(), name) != names.end()) return true;
  }
  return false;
}

}  // namespace

void validate(const FeedbackRecord& rec) {
  if (rec.sentence.empty()) throw Error(ErrorCode::Validation, "feedback sentence is empty");
  if (!known_class_name(rec.predicted)) {
    throw Error(ErrorCode::Validation, "unknown predicted class '" + rec.predicted + "'");
  }
  if (rec.action == FeedbackAction::Update || !rec.corrected.empty()) {
    if (!known_class_name(rec.corrected)) {
      throw Error(ErrorCode::Validation, "unknown corrected class '" + rec.corrected + "'");
    }
  }
  if (rec.action == FeedbackAction::Update && rec.corrected == rec.predicted) {
    throw Error(ErrorCode::Validation, "an update must change the class (both are '" +
                                           rec.predicted + "')");
  }
}

ordered_json to_json(const ClassifiedSpan& s) {
  return {{"text", s.text},           {"start", s.start},         {"end", s.end},
          {"byte_start", s.byte_start}, {"byte_end", s.byte_end}, {"class", s.label},
          {"confidence", s.confidence}};
}

ordered_json to_json(const CoinReport& r) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : r.entries) entries.push_back(to_json(e));
  ordered_json j;
  j["source"] = r.source;
  j["generated_at"] = r.generated_at;
  j["classes"] = r.classes;
  j["entries"] = entries;
  j["provenance"] = ordered_json::parse(r.provenance.dump());
  return j;
}

ordered_json to_json(const FeedbackRecord& r) {
  return {{"sentence", r.sentence},   {"predicted", r.predicted},
          {"corrected", r.corrected}, {"action", to_string(r.action)},
          {"timestamp", r.timestamp}, {"client", r.client}};
}

CoinReport report_from_json(const json& j) {
  try {
    CoinReport r;
    r.source = j.at("source").get<std::string>();
    r.generated_at = j.at("generated_at").get<std::string>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      ClassifiedSpan s;
      s.text = e.at("text").get<std::string>();
      s.start = e.at("start").get<std::size_t>();
      s.end = e.at("end").get<std::size_t>();
      s.byte_start = e.value("byte_start", std::size_t{0});
      s.byte_end = e.value("byte_end", std::size_t{0});
      s.label = e.at("class").get<std::string>();
      s.confidence = e.at("confidence").get<double>();
      r.entries.push_back(std::move(s));
    }
    r.provenance = j.value("provenance", json::object());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed report: ") + e.what());
  }
}

FeedbackRecord feedback_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Validation, "feedback must be a JSON object");
  auto str = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw Error(ErrorCode::Validation, std::string("feedback needs '") + key + "'");
      return {};
    }
    if (!it->is_string()) {
      throw Error(ErrorCode::Validation, std::string("feedback field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };
  FeedbackRecord r;
  r.sentence = str("sentence", true);
  r.predicted = str("predicted", true);
  const auto action = str("action", false);
  if (!action.empty()) {
    const auto a = parse_feedback_action(action);
    if (!a) throw Error(ErrorCode::Validation, "feedback action must be 'update' or 'remove'");
    r.action = *a;
  }
  r.corrected = str("corrected", r.action == FeedbackAction::Update);
  r.timestamp = str("timestamp", false);
  r.client = str("client", false);
  return r;
}

namespace {

std::string escape_html(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* class_color(std::string_view label) {
  if (label == "Dynamic") return "#fde2b3";
  if (label == "Semantic") return "#cde8f6";
  if (label == "Syntax") return "#d9f2d0";
  if (label == "Structure") return "#e8d9f5";
  if (label == "Context") return "#fbd5dc";
  if (label == "Quality") return "#fff3a8";
  if (label == "COIN") return "#cde8f6";
  return "#eeeeee";
}

}  // namespace

std::string render_report_html(const CoinReport& r) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>COIN report: " << escape_html(r.source) << "</title>\n"
      << "<style>\n"
      << "body{font-family:Georgia,serif;max-width:56em;margin:2em auto;color:#222}\n"
      << "table{border-collapse:collapse;width:100%}\n"
      << "th,td{border:1px solid #bbb;padding:.4em .6em;vertical-align:top;text-align:left}\n"
      << "th{background:#f4f4f4}\n.meta{color:#666;font-size:.9em}\n"
      << "@media print{body{margin:0}}\n</style>\n</head>\n<body>\n"
      << "<h1>COIN report</h1>\n<p class=\"meta\">Source: " << escape_html(r.source)
      << "<br>Generated: " << escape_html(r.generated_at) << "<br>Classes: ";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    out << (i ? ", " : "") << escape_html(r.classes[i]);
  }
  if (r.provenance.is_object()) {
    if (auto it = r.provenance.find("spec"); it != r.provenance.end() && it->contains("family")) {
      out << "<br>Model: " << escape_html((*it)["family"].get<std::string>());
    }
    if (auto it = r.provenance.find("corpus_fingerprint");
        it != r.provenance.end() && it->is_string()) {
      out << " (corpus " << escape_html(it->get<std::string>()) << ")";
    }
  }
  out << "</p>\n<p>" << r.entries.size() << " sentence(s).</p>\n"
      << "<table>\n<tr><th>#</th><th>Sentence</th><th>Class</th><th>Confidence</th></tr>\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    char conf[16];
    std::snprintf(conf, sizeof conf, "%.2f", e.confidence);
    out << "<tr style=\"background:" << class_color(e.label) << "\"><td>" << i + 1 << "</td><td>"
        << escape_html(e.text) << "</td><td>" << escape_html(e.label) << "</td><td>" << conf
        << "</td></tr>\n";
  }
  out << "</table>\n</body>\n</html>\n";
  return out.str();
}

FeedbackStore::FeedbackStore(std::filesystem::path path) : path_(std::move(path)) {}

void FeedbackStore::append(const FeedbackRecord& rec) {
  const auto line = to_json(rec).dump() + "\n";
  std::lock_guard lock(mutex_);
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) throw Error(ErrorCode::Persistence, "cannot open feedback store " + path_.string());
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0;
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) {
    throw Error(ErrorCode::Persistence, "failed writing feedback store " + path_.string());
  }
}

std::vector<FeedbackRecord> FeedbackStore::read_all() const {
  std::lock_guard lock(mutex_);
  std::vector<FeedbackRecord> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(feedback_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Persistence,
                  path_.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::size_t FeedbackStore::count() const { return read_all().size(); }

Service::Service(std::shared_ptr<const ModelBundle> model, std::shared_ptr<FeedbackStore> feedback,
                 std::function<std::string()> clock)
    : model_(std::move(model)), feedback_(std::move(feedback)), clock_(std::move(clock)) {}

const ModelBundle& Service::model() const {
  if (!model_) throw Error(ErrorCode::ServiceUnavailable, "no model is loaded");
  return *model_;
}

std::vector<std::string> Service::class_names() const {
  return label_names(model().granularity());
}

std::vector<ClassifiedSpan> Service::classify_text(
    std::string_view text, const std::optional<std::set<std::string>>& classes) const {
  const auto& bundle = model();
  const auto names = class_names();
  if (classes) {
    for (const auto& c : *classes) {
      if (std::find(names.begin(), names.end(), c) == names.end()) {
        throw Error(ErrorCode::Validation, "unknown class '" + c + "' for a " +
                                               std::string(to_string(bundle.granularity())) +
                                               "-class model");
      }
    }
  }
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::Argument, "text is empty");
  }
  std::vector<ClassifiedSpan> spans;
  std::size_t byte = 0, cp = 0;
  auto advance_to = [&](std::size_t target) {
    while (byte < target) {
      text::next_code_point(text, byte);
      ++cp;
    }
    return cp;
  };
  for (const auto& cand : ingest::segment_sentences(text)) {
    const auto p = bundle.predict(cand.text);
    ClassifiedSpan s;
    s.text = cand.text;
    s.byte_start = cand.begin;
    s.byte_end = cand.end;
    s.start = advance_to(cand.begin);
    s.end = advance_to(cand.end);
    s.label = p.label;
    s.confidence = p.confidence;
    if (!classes || classes->contains(s.label)) spans.push_back(std::move(s));
  }
  return spans;
}

CoinReport Service::generate_report(std::string_view text,
                                    const std::optional<std::set<std::string>>& classes,
                                    std::string source) const {
  CoinReport r;
  r.entries = classify_text(text, classes);
  r.source = std::move(source);
  r.generated_at = clock_();
  if (classes) {
    for (const auto& name : class_names()) {
      if (classes->contains(name)) r.classes.push_back(name);
    }
  } else {
    r.classes = class_names();
  }
  r.provenance = model().provenance();
  return r;
}

FeedbackRecord Service::record_feedback(FeedbackRecord rec) const {
  validate(rec);
  if (!feedback_) throw Error(ErrorCode::Persistence, "no feedback store is configured");
  if (rec.timestamp.empty()) rec.timestamp = clock_();
  feedback_->append(rec);
  return rec;
}

json Service::health() const {
  json j;
  j["status"] = model_ ? "ok" : "no-model";
  j["model"] = model_ ? model_->provenance() : json(nullptr);
  j["classes"] = model_ ? json(class_names()) : json::array();
  return j;
}

void ServerConfig::apply_environment() {
  if (const char* v = std::getenv("COINER_MODEL"); v && *v) model_path = v;
  if (const char* v = std::getenv("COINER_FEEDBACK"); v && *v) feedback_path = v;
  if (const char* v = std::getenv("COINER_PORT"); v && *v) {
    char* end = nullptr;
    const long p = std::strtol(v, &end, 10);
    if (*end != '\0' || p < 0 || p > 65535) {
      throw Error(ErrorCode::Config, std::string("COINER_PORT is not a valid port: ") + v);
    }
    port = static_cast<int>(p);
  }
}

std::shared_ptr<Service> make_service(const ServerConfig& config) {
  if (config.model_path.empty()) throw Error(ErrorCode::Config, "no model path configured");
  auto model = std::make_shared<const ModelBundle>(ModelBundle::load(config.model_path));
  auto store = std::make_shared<FeedbackStore>(config.feedback_path);
  return std::make_shared<Service>(std::move(model), std::move(store));
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Argument:
    case ErrorCode::Parse:
    case ErrorCode::Label:
    case ErrorCode::Validation:
    case ErrorCode::Config:
      return 400;
    case ErrorCode::ServiceUnavailable:
      return 503;
    case ErrorCode::Fetch:
      return 502;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& msg) {
  ordered_json j;
  j["error"] = {{"code", code}, {"message", msg}};
  send_json(res, status, j.dump());
}

json parse_body(const httplib::Request& req) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::Parse, "request body is not valid JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::Parse, "request body must be a JSON object");
  return j;
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::Argument, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::set<std::string>> class_filter(const json& j) {
  auto it = j.find("classes");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw Error(ErrorCode::Argument, "field 'classes' must be a list of names");
  std::set<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorCode::Argument, "field 'classes' must be a list of names");
    out.insert(v.get<std::string>());
  }
  return out;
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server http;
  std::atomic<bool> stop_requested{false};
  std::atomic<bool> run_entered{false};
};

HttpServer::HttpServer(std::shared_ptr<Service> service, ServerConfig config)
    : impl_(std::make_unique<Impl>()), service_(std::move(service)), config_(std::move(config)) {
  auto& http = impl_->http;
  http.set_payload_max_length(config_.max_body_bytes);

  const auto origins = config_.cors_origins;
  http.set_post_routing_handler([origins](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    const bool any = std::find(origins.begin(), origins.end(), "*") != origins.end();
    if (any || std::find(origins.begin(), origins.end(), origin) != origins.end()) {
      res.set_header("Access-Control-Allow-Origin", any ? "*" : origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Accept");
      res.set_header("Access-Control-Max-Age", "600");
    }
  });
  http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  http.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const Error& e) {
          send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const std::exception& e) {
          send_error(res, 500, "internal", e.what());
        } catch (...) {
          send_error(res, 500, "internal", "unknown failure");
        }
      });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) send_error(res, 404, "not_found", "no such endpoint");
    else if (res.status == 413) send_error(res, 413, "too_large", "request body too large");
  });

  auto svc = service_;
  auto route = [&http](const std::string& path, bool post, httplib::Server::Handler h) {
    for (const auto& p : {"/v1" + path, path}) {
      if (post) http.Post(p, h);
      else http.Get(p, h);
    }
  };

  route("/health", false, [svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, svc->has_model() ? 200 : 503, svc->health().dump());
  });

  route("/classify", true, [svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto spans = svc->classify_text(required_string(body, "text"), class_filter(body));
    ordered_json arr = ordered_json::array();
    for (const auto& s : spans) arr.push_back(to_json(s));
    ordered_json out;
    out["spans"] = arr;
    send_json(res, 200, out.dump());
  });

  route("/report", true, [svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto source = body.value("source", std::string("request"));
    const auto report =
        svc->generate_report(required_string(body, "text"), class_filter(body), source);
    const auto format = body.value("format", std::string("json"));
    if (format == "html") {
      res.set_content(render_report_html(report), "text/html; charset=utf-8");
    } else if (format == "json") {
      send_json(res, 200, to_json(report).dump());
    } else {
      throw Error(ErrorCode::Argument, "format must be 'json' or 'html'");
    }
  });

  route("/feedback", true, [svc](const httplib::Request& req, httplib::Response& res) {
    const auto rec = svc->record_feedback(feedback_from_json(parse_body(req)));
    ordered_json out;
    out["ok"] = true;
    out["record"] = to_json(rec);
    send_json(res, 200, out.dump());
  });

  if (config_.enable_fetch_proxy) {
    route("/fetch", true, [](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto page = ingest::fetch_page(required_string(body, "url"));
      ordered_json out;
      out["url"] = page.url;
      out["final_url"] = page.final_url;
      out["status"] = page.status;
      out["fetched_at"] = page.fetched_at;
      out["text"] = ingest::strip_noise(page.html);
      send_json(res, 200, out.dump());
    });
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& http = impl_->http;
  if (config_.port == 0) {
    port_ = http.bind_to_any_port(config_.host);
    if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind " + config_.host);
  } else {
    if (!http.bind_to_port(config_.host, config_.port)) {
      throw Error(ErrorCode::Io,
                  "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    port_ = config_.port;
  }
  return port_;
}

void HttpServer::run() {
  impl_->run_entered = true;
  if (impl_->stop_requested) return;
  impl_->http.listen_after_bind();
}

void HttpServer::stop() {
  impl_->stop_requested = true;
  if (impl_->run_entered) {
    impl_->http.wait_until_ready();
    impl_->http.stop();
  }
}

bool HttpServer::running() const { return impl_->http.is_running(); }

}  // namespace coiner::server
