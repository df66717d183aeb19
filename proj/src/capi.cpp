#include "coiner/coiner.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "coiner/corpus.hpp"
#include "coiner/error.hpp"
#include "coiner/eval.hpp"
#include "coiner/ingest.hpp"
#include "coiner/model_io.hpp"
#include "coiner/server.hpp"
#include "json.hpp"

struct coiner_model {
  std::shared_ptr<const coiner::ModelBundle> bundle;
};

struct coiner_server {
  std::unique_ptr<coiner::server::HttpServer> http;
};

namespace {

using nlohmann::json;
using namespace coiner;

thread_local std::string g_last_error;

coiner_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Argument: return COINER_E_ARGUMENT;
    case ErrorCode::Parse: return COINER_E_PARSE;
    case ErrorCode::Integrity: return COINER_E_INTEGRITY;
    case ErrorCode::Label: return COINER_E_LABEL;
    case ErrorCode::Io: return COINER_E_IO;
    case ErrorCode::Fetch: return COINER_E_FETCH;
    case ErrorCode::Config: return COINER_E_CONFIG;
    case ErrorCode::DegenerateTraining: return COINER_E_DEGENERATE_TRAINING;
    case ErrorCode::TrainingDiverged: return COINER_E_TRAINING_DIVERGED;
    case ErrorCode::TrainingIncomplete: return COINER_E_TRAINING_INCOMPLETE;
    case ErrorCode::Validation: return COINER_E_VALIDATION;
    case ErrorCode::Persistence: return COINER_E_PERSISTENCE;
    case ErrorCode::ServiceUnavailable: return COINER_E_SERVICE_UNAVAILABLE;
    case ErrorCode::SearchFailed: return COINER_E_SEARCH_FAILED;
  }
  return COINER_E_INTERNAL;
}

template <typename F>
coiner_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return COINER_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid options: ") + e.what();
    return COINER_E_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return COINER_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return COINER_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return COINER_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::Argument, std::string(what) + " must not be NULL");
}

json parse_options(const char* options) {
  if (!options || !*options) return json::object();
  json j;
  try {
    j = json::parse(options);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("options are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Argument, "options must be a JSON object");
  return j;
}

Granularity granularity_of(const json& o) {
  const auto name = o.value("granularity", std::string("seven"));
  const auto g = parse_granularity(name);
  if (!g) throw Error(ErrorCode::Argument, "granularity must be 'seven' or 'two', got '" + name + "'");
  return *g;
}

features::FeatureConfig feature_config_of(const json& o) {
  features::FeatureConfig c;
  if (auto it = o.find("features"); it != o.end()) {
    c.nmax = it->value("nmax", c.nmax);
    c.min_df = it->value("min_df", c.min_df);
    c.use_pattern_lexicons = it->value("use_pattern_lexicons", c.use_pattern_lexicons);
  }
  c.validate();
  return c;
}

std::uint64_t seed_of(const json& o) { return o.value("seed", std::uint64_t{42}); }

ml::AlgorithmSpec spec_of(const json& o, const std::string& default_family = "MultinomialNB") {
  json s;
  s["family"] = o.value("family", default_family);
  if (auto it = o.find("params"); it != o.end()) s["params"] = *it;
  if (auto it = o.find("input"); it != o.end()) s["input"] = *it;
  s["seed"] = seed_of(o);
  return ml::spec_from_json(s);
}

features::PatternLexicons lexicons_of(const json& o) {
  if (auto it = o.find("lexicons_dir"); it != o.end() && it->is_string() && !it->empty()) {
    return features::PatternLexicons::from_directory(it->get<std::string>());
  }
  return features::PatternLexicons::defaults();
}

text::StopwordList stopwords_of(const json& o) {
  if (auto it = o.find("stopwords_file"); it != o.end() && it->is_string() && !it->empty()) {
    return text::StopwordList::from_file(it->get<std::string>());
  }
  return text::default_stopwords();
}

eval::CvOptions cv_options_of(const json& o) {
  eval::CvOptions cv;
  cv.k = o.value("k", 10);
  cv.seed = seed_of(o);
  cv.threads = o.value("threads", 1u);
  cv.fit_features_on_full_corpus = o.value("fit_features_on_full_corpus", false);
  cv.lexicons = lexicons_of(o);
  cv.stopwords = stopwords_of(o);
  return cv;
}

std::optional<std::set<std::string>> classes_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array()) throw Error(ErrorCode::Argument, "classes must be a JSON array of names");
  std::set<std::string> out;
  for (const auto& v : j) out.insert(v.get<std::string>());
  return out;
}

std::string plain_report(const server::CoinReport& r) {
  std::string out;
  for (const auto& e : r.entries) {
    char conf[16];
    std::snprintf(conf, sizeof conf, "%.2f", e.confidence);
    out += e.label + "\t" + conf + "\t" + e.text + "\n";
  }
  return out;
}

}  // namespace

extern "C" {

const char* coiner_version(void) { return "1.0.0"; }

const char* coiner_status_name(coiner_status status) {
  switch (status) {
    case COINER_OK: return "ok";
    case COINER_E_ARGUMENT: return "argument";
    case COINER_E_PARSE: return "parse";
    case COINER_E_INTEGRITY: return "integrity";
    case COINER_E_LABEL: return "label";
    case COINER_E_IO: return "io";
    case COINER_E_FETCH: return "fetch";
    case COINER_E_CONFIG: return "config";
    case COINER_E_DEGENERATE_TRAINING: return "degenerate_training";
    case COINER_E_TRAINING_DIVERGED: return "training_diverged";
    case COINER_E_TRAINING_INCOMPLETE: return "training_incomplete";
    case COINER_E_VALIDATION: return "validation";
    case COINER_E_PERSISTENCE: return "persistence";
    case COINER_E_SERVICE_UNAVAILABLE: return "service_unavailable";
    case COINER_E_SEARCH_FAILED: return "search_failed";
    case COINER_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* coiner_last_error(void) { return g_last_error.c_str(); }

void coiner_string_free(char* s) { std::free(s); }

coiner_status coiner_ingest(const char* source, const char* options_json, char** skeleton_jsonl,
                            char** drop_log_jsonl, char** summary_json) {
  return guarded([&] {
    require(source, "source");
    const auto o = parse_options(options_json);
    ingest::FilterConfig filter;
    filter.code_ratio = o.value("code_ratio", filter.code_ratio);
    filter.min_tokens = o.value("min_tokens", filter.min_tokens);
    filter.enabled = o.value("filter", true);
    ingest::FetchOptions fetch;
    fetch.timeout = std::chrono::milliseconds(o.value("timeout_ms", 15000));
    fetch.user_agent = o.value("user_agent", fetch.user_agent);
    const auto r = ingest::ingest_source(source, o.value("api", std::string()), filter, fetch);
    nlohmann::ordered_json summary;
    summary["source"] = r.source;
    summary["api"] = r.api;
    summary["kept"] = r.kept.size();
    summary["dropped"] = r.dropped.size();
    summary["total"] = r.total();
    put(skeleton_jsonl, ingest::format_skeleton(r));
    put(drop_log_jsonl, ingest::format_drop_log(r));
    put(summary_json, summary.dump());
  });
}

coiner_status coiner_train(const char* corpus_path, const char* options_json, coiner_model** out) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(out, "out");
    const auto o = parse_options(options_json);
    const auto corpus = load_corpus(corpus_path, granularity_of(o));
    auto bundle = ModelBundle::train(corpus, feature_config_of(o), spec_of(o), lexicons_of(o),
                                     stopwords_of(o));
    *out = new coiner_model{std::make_shared<const ModelBundle>(std::move(bundle))};
  });
}

coiner_status coiner_model_load(const char* path, coiner_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new coiner_model{std::make_shared<const ModelBundle>(ModelBundle::load(path))};
  });
}

coiner_status coiner_model_save(const coiner_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    model->bundle->save(path);
  });
}

void coiner_model_free(coiner_model* model) { delete model; }

coiner_status coiner_model_info(const coiner_model* model, char** info_json) {
  return guarded([&] {
    require(model, "model");
    auto j = model->bundle->provenance();
    j["labels"] = label_names(model->bundle->granularity());
    put(info_json, j.dump());
  });
}

coiner_status coiner_model_classify(const coiner_model* model, const char* text,
                                    const char* classes_json, char** spans_json) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    std::optional<std::set<std::string>> classes;
    if (classes_json && *classes_json) {
      json j;
      try {
        j = json::parse(classes_json);
      } catch (const json::exception&) {
        throw Error(ErrorCode::Parse, "classes are not valid JSON");
      }
      classes = classes_of(j);
    }
    const server::Service svc(model->bundle, nullptr);
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : svc.classify_text(text, classes)) arr.push_back(server::to_json(s));
    nlohmann::ordered_json outj;
    outj["spans"] = arr;
    put(spans_json, outj.dump());
  });
}

coiner_status coiner_model_report(const coiner_model* model, const char* text,
                                  const char* options_json, char** report) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    const auto o = parse_options(options_json);
    const server::Service svc(model->bundle, nullptr);
    const auto classes = classes_of(o.value("classes", json(nullptr)));
    const auto r = svc.generate_report(text, classes, o.value("source", std::string("text")));
    const auto format = o.value("format", std::string("json"));
    if (format == "json") put(report, server::to_json(r).dump(2) + "\n");
    else if (format == "html") put(report, server::render_report_html(r));
    else if (format == "plain") put(report, plain_report(r));
    else throw Error(ErrorCode::Argument, "format must be plain, json or html");
  });
}

coiner_status coiner_evaluate(const char* corpus_path, const char* options_json,
                              char** report_json, char** table) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    const auto o = parse_options(options_json);
    const auto corpus = load_corpus(corpus_path, granularity_of(o));
    const auto report =
        eval::cross_validate(spec_of(o), corpus, feature_config_of(o), cv_options_of(o));
    put(report_json, eval::to_json(report).dump(2) + "\n");
    put(table, eval::format_table(report));
  });
}

coiner_status coiner_tune(const char* corpus_path, const char* grid_path, const char* options_json,
                          char** result_json) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(grid_path, "grid_path");
    const auto o = parse_options(options_json);
    const auto grid = eval::load_grid(grid_path);
    const auto corpus = load_corpus(corpus_path, granularity_of(o));
    eval::SearchOptions so;
    so.cv = cv_options_of(o);
    so.threads = o.value("threads", 1u);
    so.base = spec_of(o, std::string(ml::to_string(grid.family)));
    try {
      const auto result = eval::grid_search(grid, corpus, feature_config_of(o), so);
      put(result_json, eval::to_json(result).dump(2) + "\n");
    } catch (const eval::SearchFailed& e) {
      put(result_json, eval::to_json(e.result()).dump(2) + "\n");
      throw;
    }
  });
}

coiner_status coiner_synth(const char* options_json, char** corpus_jsonl) {
  return guarded([&] {
    const auto o = parse_options(options_json);
    SyntheticCorpusSpec s;
    s.per_class = o.value("per_class", s.per_class);
    s.words_per_sentence = o.value("words_per_sentence", s.words_per_sentence);
    s.vocabulary_per_class = o.value("vocabulary_per_class", s.vocabulary_per_class);
    s.noise_vocabulary = o.value("noise_vocabulary", s.noise_vocabulary);
    s.noise_fraction = o.value("noise_fraction", s.noise_fraction);
    s.seed = seed_of(o);
    put(corpus_jsonl, format_corpus(generate_synthetic_corpus(s)));
  });
}

coiner_status coiner_corpus_stats(const char* corpus_path, const char* options_json,
                                  char** stats_json) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    const auto o = parse_options(options_json);
    const auto corpus = load_corpus(corpus_path, granularity_of(o));
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const auto& c : class_distribution(corpus)) {
      classes.push_back({{"class", c.name}, {"count", c.count}, {"fraction", c.fraction}});
    }
    char fp[17];
    std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(corpus.fingerprint()));
    nlohmann::ordered_json j;
    j["size"] = corpus.size();
    j["granularity"] = to_string(corpus.granularity());
    j["fingerprint"] = fp;
    j["classes"] = classes;
    put(stats_json, j.dump());
  });
}

coiner_status coiner_server_create(const char* options_json, coiner_server** out) {
  return guarded([&] {
    require(out, "out");
    const auto o = parse_options(options_json);
    server::ServerConfig cfg;
    if (o.value("use_environment", true)) cfg.apply_environment();
    cfg.host = o.value("host", cfg.host);
    cfg.port = o.value("port", cfg.port);
    if (o.contains("model")) cfg.model_path = o["model"].get<std::string>();
    if (o.contains("feedback")) cfg.feedback_path = o["feedback"].get<std::string>();
    if (o.contains("cors_origins")) {
      cfg.cors_origins = o["cors_origins"].get<std::vector<std::string>>();
    }
    cfg.enable_fetch_proxy = o.value("fetch_proxy", cfg.enable_fetch_proxy);
    if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::Config, "port out of range");
    auto svc = server::make_service(cfg);
    auto s = std::make_unique<coiner_server>();
    s->http = std::make_unique<server::HttpServer>(std::move(svc), cfg);
    s->http->bind();
    *out = s.release();
  });
}

coiner_status coiner_server_run(coiner_server* server) {
  return guarded([&] {
    require(server, "server");
    server->http->run();
  });
}

coiner_status coiner_server_stop(coiner_server* server) {
  return guarded([&] {
    require(server, "server");
    server->http->stop();
  });
}

int coiner_server_port(const coiner_server* server) { return server ? server->http->port() : -1; }

void coiner_server_free(coiner_server* server) { delete server; }

}  // extern "C"
