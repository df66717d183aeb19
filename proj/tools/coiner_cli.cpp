// Command-line front end over the C API.
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "coiner/coiner.h"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int verbosity = 0;

int exit_code(coiner_status s) {
  switch (s) {
    case COINER_OK:
      return kExitOk;
    case COINER_E_ARGUMENT:
    case COINER_E_PARSE:
    case COINER_E_INTEGRITY:
    case COINER_E_LABEL:
    case COINER_E_CONFIG:
    case COINER_E_VALIDATION:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

int fail(coiner_status s) {
  std::cerr << "coiner: " << coiner_status_name(s) << ": " << coiner_last_error() << "\n";
  return exit_code(s);
}

// An unreadable input named on the command line is a usage error.
int fail_input(coiner_status s) {
  const int rc = fail(s);
  return s == COINER_E_IO ? kExitUsage : rc;
}

// Owns a library-allocated string.
struct Owned {
  char* p = nullptr;
  ~Owned() { coiner_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

bool write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return static_cast<bool>(std::cout);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << data;
  if (!out) {
    std::cerr << "coiner: io: cannot write " << path << "\n";
    return false;
  }
  return true;
}

struct ModelOptions {
  std::string granularity = "seven";
  std::string family = "MultinomialNB";
  std::vector<std::string> params;
  std::string input;
  int nmax = 3;
  int min_df = 1;
  bool patterns = false;
  std::string lexicons;
  std::string stopwords;

  void add(CLI::App* cmd, bool with_family = true) {
    cmd->add_option("--granularity", granularity, "Label granularity")
        ->check(CLI::IsMember({"seven", "two"}))
        ->capture_default_str();
    if (with_family) {
      cmd->add_option("--family", family,
                      "MultinomialNB, ComplementNB, KNN, LinearSVM, PolySVM, LogRegL2, LogRegSGD")
          ->capture_default_str();
    }
    cmd->add_option("-p,--param", params, "Hyperparameter as name=value (repeatable)");
    cmd->add_option("--input", input, "Row representation: auto, counts or tfidf");
    cmd->add_option("--nmax", nmax, "Longest n-gram")->capture_default_str();
    cmd->add_option("--min-df", min_df, "Minimum document frequency")->capture_default_str();
    cmd->add_flag("--patterns", patterns, "Append pattern-lexicon feature columns");
    cmd->add_option("--lexicons", lexicons, "Directory of pattern lexicon word lists");
    cmd->add_option("--stopwords", stopwords, "Stopword list file");
  }

  // Returns false and reports on a malformed name=value pair.
  bool to_json(json& o, std::uint64_t seed, bool include_family = true) const {
    o["granularity"] = granularity;
    o["features"] = {{"nmax", nmax}, {"min_df", min_df}, {"use_pattern_lexicons", patterns}};
    if (include_family) o["family"] = family;
    json p = json::object();
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "coiner: argument: --param expects name=value, got '" << kv << "'\n";
        return false;
      }
      p[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    o["params"] = p;
    if (!input.empty()) o["input"] = input;
    o["seed"] = seed;
    if (!lexicons.empty()) o["lexicons_dir"] = lexicons;
    if (!stopwords.empty()) o["stopwords_file"] = stopwords;
    return true;
  }
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const auto comma = item.find(',', start);
      const auto part = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!part.empty()) out.push_back(part);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

coiner_server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conceptual interoperability constraint (COIN) classifier toolkit"};
  app.set_version_flag("--version", std::string(coiner_version()));
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value configuration file mirroring the flags");
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Seed for folds, shuffles and SGD")->capture_default_str();
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on standard error");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Turn documentation pages into an annotation skeleton");
  std::vector<std::string> sources;
  std::string ingest_out, drop_log, api;
  double code_ratio = 0.30;
  std::size_t min_tokens = 3;
  int timeout_ms = 15000;
  ingest->add_option("sources", sources, "Local .html/.txt files or http(s) URLs")->required();
  ingest->add_option("-o,--output", ingest_out, "Skeleton JSONL (default: stdout)");
  ingest->add_option("--drop-log", drop_log, "Where to write dropped candidates (JSONL)");
  ingest->add_option("--api", api, "API name recorded on every sentence");
  ingest->add_option("--code-ratio", code_ratio, "Non-letter ratio that marks code mixture")
      ->capture_default_str();
  ingest->add_option("--min-tokens", min_tokens, "Shorter candidates are dropped")
      ->capture_default_str();
  ingest->add_option("--timeout-ms", timeout_ms, "Fetch timeout")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Fit features and a classifier on a labelled corpus");
  std::string train_corpus, model_out;
  ModelOptions train_opts;
  train->add_option("-c,--corpus", train_corpus, "Labelled corpus (JSONL)")->required();
  train->add_option("-o,--model-out", model_out, "Model file to write")->required();
  train_opts.add(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
  std::string eval_corpus, eval_out;
  ModelOptions eval_opts;
  int eval_k = 10;
  unsigned eval_threads = 1;
  bool eval_json = false, full_features = false;
  evaluate->add_option("-c,--corpus", eval_corpus, "Labelled corpus (JSONL)")->required();
  evaluate->add_option("-k,--folds", eval_k, "Number of folds")->capture_default_str();
  evaluate->add_option("--threads", eval_threads, "Folds evaluated concurrently (0 = all cores)")
      ->capture_default_str();
  evaluate->add_option("-o,--output", eval_out, "Write the JSON report here");
  evaluate->add_flag("--json", eval_json, "Print the JSON report instead of the table");
  evaluate->add_flag("--full-corpus-features", full_features,
                     "Fit vocabulary on the whole corpus before splitting (leaks test folds)");
  eval_opts.add(evaluate);

  // tune
  auto* tune = app.add_subcommand("tune", "Exhaustive grid search over hyperparameters");
  std::string tune_corpus, grid_path, tune_out;
  ModelOptions tune_opts;
  int tune_k = 10;
  unsigned tune_threads = 1;
  bool tune_json = false;
  tune->add_option("-c,--corpus", tune_corpus, "Labelled corpus (JSONL)")->required();
  tune->add_option("-g,--grid", grid_path, "Grid file")->required();
  tune->add_option("-k,--folds", tune_k, "Number of folds")->capture_default_str();
  tune->add_option("--threads", tune_threads, "Trials evaluated concurrently (0 = all cores)")
      ->capture_default_str();
  tune->add_option("-o,--output", tune_out, "Write the JSON result here");
  tune->add_flag("--json", tune_json, "Print the JSON result instead of the summary");
  tune_opts.add(tune, false);

  // classify
  auto* classify = app.add_subcommand("classify", "Classify the sentences of a text");
  std::string cls_model, cls_text, cls_input, cls_url, cls_format = "plain", cls_out, cls_source;
  std::vector<std::string> cls_classes;
  classify->add_option("-m,--model", cls_model, "Model file")->required();
  auto* in_text = classify->add_option("-t,--text", cls_text, "Text to classify");
  auto* in_file = classify->add_option("-i,--input", cls_input, "Text or HTML file to classify");
  auto* in_url = classify->add_option("-u,--url", cls_url, "Page to fetch and classify");
  in_text->excludes(in_file, in_url);
  in_file->excludes(in_url);
  classify->add_option("--classes", cls_classes, "Only report these classes (comma separated)");
  classify->add_option("-f,--format", cls_format, "plain, json or html")
      ->check(CLI::IsMember({"plain", "json", "html"}))
      ->capture_default_str();
  classify->add_option("-o,--output", cls_out, "Write the report here (default: stdout)");
  classify->add_option("--source", cls_source, "Source name recorded in the report");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP classification service");
  std::string srv_model, srv_feedback, srv_host = "127.0.0.1";
  int srv_port = 8080;
  std::vector<std::string> srv_origins;
  bool no_fetch = false;
  auto* opt_model = serve->add_option("-m,--model", srv_model, "Model file [env COINER_MODEL]");
  auto* opt_feedback =
      serve->add_option("--feedback", srv_feedback, "Feedback JSONL [env COINER_FEEDBACK]");
  serve->add_option("--host", srv_host, "Bind address")->capture_default_str();
  auto* opt_port = serve->add_option("--port", srv_port, "Port, 0 = any [env COINER_PORT]");
  auto* opt_origins = serve->add_option("--cors-origin", srv_origins,
                                        "Allowed cross-origin origin, '*' for any (repeatable)");
  serve->add_flag("--no-fetch-proxy", no_fetch, "Disable POST /v1/fetch");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic corpus");
  std::string synth_out;
  std::size_t per_class = 100, words = 10, vocab = 30, noise_vocab = 60;
  double noise = 0.2;
  synth->add_option("-o,--output", synth_out, "Corpus JSONL (default: stdout)");
  synth->add_option("--per-class", per_class, "Sentences per class")->capture_default_str();
  synth->add_option("--words", words, "Words per sentence")->capture_default_str();
  synth->add_option("--vocabulary", vocab, "Vocabulary size per class")->capture_default_str();
  synth->add_option("--noise-vocabulary", noise_vocab, "Shared noise vocabulary size")
      ->capture_default_str();
  synth->add_option("--noise", noise, "Fraction of noise tokens")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus size and class distribution");
  std::string stats_corpus, stats_granularity = "seven";
  stats->add_option("-c,--corpus", stats_corpus, "Labelled corpus (JSONL)")->required();
  stats->add_option("--granularity", stats_granularity, "seven or two")
      ->check(CLI::IsMember({"seven", "two"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*ingest) {
    json o = {{"code_ratio", code_ratio}, {"min_tokens", min_tokens}, {"timeout_ms", timeout_ms}};
    if (!api.empty()) o["api"] = api;
    const auto opts = o.dump();
    std::string skeleton, drops;
    std::size_t kept = 0, dropped = 0;
    for (const auto& src : sources) {
      Owned sk, dl, sum;
      const auto s = coiner_ingest(src.c_str(), opts.c_str(), &sk.p, &dl.p, &sum.p);
      if (s != COINER_OK) return fail_input(s);
      skeleton += sk.str();
      drops += dl.str();
      const auto j = json::parse(sum.str());
      kept += j["kept"].get<std::size_t>();
      dropped += j["dropped"].get<std::size_t>();
    }
    if (!write_output(ingest_out, skeleton)) return kExitRuntime;
    if (!drop_log.empty() && !write_output(drop_log, drops)) return kExitRuntime;
    std::cerr << kept << " sentences kept, " << dropped << " dropped, " << kept + dropped
              << " candidates\n";
    return kExitOk;
  }

  if (*train) {
    json o;
    if (!train_opts.to_json(o, seed)) return kExitUsage;
    coiner_model* model = nullptr;
    auto s = coiner_train(train_corpus.c_str(), o.dump().c_str(), &model);
    if (s != COINER_OK) return fail_input(s);
    s = coiner_model_save(model, model_out.c_str());
    Owned info;
    if (s == COINER_OK) s = coiner_model_info(model, &info.p);
    coiner_model_free(model);
    if (s != COINER_OK) return fail(s);
    const auto j = json::parse(info.str());
    std::cerr << "wrote " << model_out << " (" << j["spec"]["family"].get<std::string>() << ", "
              << j["vocabulary_size"] << " features, " << j["training_size"] << " sentences)\n";
    return kExitOk;
  }

  if (*evaluate) {
    json o;
    if (!eval_opts.to_json(o, seed)) return kExitUsage;
    o["k"] = eval_k;
    o["threads"] = eval_threads;
    o["fit_features_on_full_corpus"] = full_features;
    Owned report, table;
    const auto s = coiner_evaluate(eval_corpus.c_str(), o.dump().c_str(), &report.p, &table.p);
    if (s != COINER_OK) return fail_input(s);
    if (!eval_out.empty() && !write_output(eval_out, report.str())) return kExitRuntime;
    std::cout << (eval_json ? report.str() : table.str());
    return kExitOk;
  }

  if (*tune) {
    json o;
    if (!tune_opts.to_json(o, seed, false)) return kExitUsage;
    o["k"] = tune_k;
    o["threads"] = tune_threads;
    Owned result;
    const auto s = coiner_tune(tune_corpus.c_str(), grid_path.c_str(), o.dump().c_str(), &result.p);
    if (result.p && !tune_out.empty() && !write_output(tune_out, result.str())) return kExitRuntime;
    if (s != COINER_OK) return fail_input(s);
    const auto j = json::parse(result.str());
    if (tune_json) {
      std::cout << result.str();
    } else {
      const auto& best = j["trials"][j["best_index"].get<std::size_t>()];
      std::size_t failed = 0;
      for (const auto& t : j["trials"]) failed += t["error"].is_null() ? 0 : 1;
      std::printf("%zu trials (%zu failed)\nbest #%zu: %s\nweighted F %.4f  accuracy %.4f\n",
                  j["trials"].size(), failed, best["index"].get<std::size_t>(),
                  best["assignment"].dump().c_str(),
                  best["aggregate"]["f_measure"].get<double>(),
                  best["aggregate"]["accuracy"].get<double>());
    }
    return kExitOk;
  }

  if (*classify) {
    std::string text;
    std::string source = cls_source;
    if (!cls_url.empty() || !cls_input.empty()) {
      // Reuse the ingest path for markup stripping, but keep every sentence.
      const auto& src = cls_url.empty() ? cls_input : cls_url;
      const bool plain = cls_url.empty() && src.size() >= 4 && src.substr(src.size() - 4) == ".txt";
      if (plain) {
        std::ifstream in(src, std::ios::binary);
        if (!in) {
          std::cerr << "coiner: io: cannot read " << src << "\n";
          return kExitUsage;
        }
        text.assign(std::istreambuf_iterator<char>(in), {});
      } else {
        Owned sk;
        const auto s = coiner_ingest(src.c_str(), R"({"filter": false})", &sk.p, nullptr, nullptr);
        if (s != COINER_OK) return fail_input(s);
        std::istringstream lines(sk.str());
        std::string line;
        while (std::getline(lines, line)) text += json::parse(line)["text"].get<std::string>() + "\n";
      }
      if (source.empty()) source = src;
    } else if (in_text->count() > 0) {
      text = cls_text;
      if (source.empty()) source = "text";
    } else {
      std::cerr << "coiner: argument: one of --text, --input or --url is required\n";
      return kExitUsage;
    }
    coiner_model* model = nullptr;
    auto s = coiner_model_load(cls_model.c_str(), &model);
    if (s != COINER_OK) return fail(s);
    json o = {{"source", source}, {"format", cls_format}};
    const auto classes = split_list(cls_classes);
    if (!classes.empty()) o["classes"] = classes;
    Owned report;
    s = coiner_model_report(model, text.c_str(), o.dump().c_str(), &report.p);
    coiner_model_free(model);
    if (s != COINER_OK) return fail(s);
    return write_output(cls_out, report.str()) ? kExitOk : kExitRuntime;
  }

  if (*serve) {
    // Flags and config values win over the environment, which wins over defaults.
    json o = {{"host", srv_host}, {"fetch_proxy", !no_fetch}, {"use_environment", true}};
    if (opt_model->count() > 0) o["model"] = srv_model;
    if (opt_feedback->count() > 0) o["feedback"] = srv_feedback;
    if (opt_port->count() > 0) o["port"] = srv_port;
    if (opt_origins->count() > 0) o["cors_origins"] = split_list(srv_origins);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto s = coiner_server_create(o.dump().c_str(), &g_server);
    if (s != COINER_OK) return fail(s);
    std::cerr << "listening on http://" << srv_host << ":" << coiner_server_port(g_server) << "\n";
    std::thread([signals] {
      int sig = 0;
      sigwait(&signals, &sig);
      coiner_server_stop(g_server);
    }).detach();
    s = coiner_server_run(g_server);
    coiner_server_free(g_server);
    if (s != COINER_OK) return fail(s);
    return kExitOk;
  }

  if (*synth) {
    const json o = {{"per_class", per_class},         {"words_per_sentence", words},
                    {"vocabulary_per_class", vocab},  {"noise_vocabulary", noise_vocab},
                    {"noise_fraction", noise},        {"seed", seed}};
    Owned corpus;
    const auto s = coiner_synth(o.dump().c_str(), &corpus.p);
    if (s != COINER_OK) return fail(s);
    return write_output(synth_out, corpus.str()) ? kExitOk : kExitRuntime;
  }

  if (*stats) {
    Owned out;
    const json o = {{"granularity", stats_granularity}};
    const auto s = coiner_corpus_stats(stats_corpus.c_str(), o.dump().c_str(), &out.p);
    if (s != COINER_OK) return fail_input(s);
    const auto j = json::parse(out.str());
    std::printf("%zu sentences, fingerprint %s\n", j["size"].get<std::size_t>(),
                j["fingerprint"].get<std::string>().c_str());
    for (const auto& c : j["classes"]) {
      std::printf("%-12s %6zu  %5.1f%%\n", c["class"].get<std::string>().c_str(),
                  c["count"].get<std::size_t>(), 100 * c["fraction"].get<double>());
    }
    return kExitOk;
  }
  return kExitUsage;
}
