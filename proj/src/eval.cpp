#include "coiner/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace coiner::eval {

using nlohmann::ordered_json;

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> gold,
                          std::vector<std::string> classes) {
  if (predicted.size() != gold.size()) {
    throw Error(ErrorCode::Argument, "prediction and gold label counts differ (" +
                                         std::to_string(predicted.size()) + " vs " +
                                         std::to_string(gold.size()) + ")");
  }
  if (gold.empty()) throw Error(ErrorCode::Argument, "confusion matrix needs at least one label");
  ConfusionMatrix cm;
  const auto n = classes.size();
  cm.classes = std::move(classes);
  cm.counts.assign(n, std::vector<std::uint64_t>(n, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(gold[i]) >= n ||
        static_cast<std::size_t>(predicted[i]) >= n) {
      throw Error(ErrorCode::Argument, "label id out of range at index " + std::to_string(i));
    }
    ++cm.counts[gold[i]][predicted[i]];
  }
  return cm;
}

double f_measure(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  const auto n = cm.classes.size();
  const double total = static_cast<double>(cm.total());
  std::uint64_t correct = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t tp = cm.counts[c][c], support = 0, predicted = 0;
    for (std::size_t o = 0; o < n; ++o) {
      support += cm.counts[c][o];
      predicted += cm.counts[o][c];
    }
    correct += tp;
    ClassMetrics cls;
    cls.name = cm.classes[c];
    cls.support = support;
    cls.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cls.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    cls.f_measure = f_measure(cls.precision, cls.recall);
    // Support-weighted sums, divided once below; support * recall is tp.
    const double w = static_cast<double>(support);
    m.precision += w * cls.precision;
    m.recall += static_cast<double>(tp);
    m.f_measure += w * cls.f_measure;
    if (support > 0) {
      ++present;
      m.macro_precision += cls.precision;
      m.macro_recall += cls.recall;
      m.macro_f_measure += cls.f_measure;
    }
    m.per_class.push_back(std::move(cls));
  }
  if (present > 0) {
    m.macro_precision /= static_cast<double>(present);
    m.macro_recall /= static_cast<double>(present);
    m.macro_f_measure /= static_cast<double>(present);
  }
  if (total > 0) {
    m.precision /= total;
    m.recall /= total;
    m.f_measure /= total;
  }
  m.accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  auto clamp01 = [](double& v) { v = std::clamp(v, 0.0, 1.0); };
  clamp01(m.precision);
  clamp01(m.recall);
  clamp01(m.f_measure);
  return m;
}

RocCurve roc(std::span<const double> scores, std::span<const bool> positives) {
  if (scores.size() != positives.size()) {
    throw Error(ErrorCode::Argument, "scores and labels differ in length");
  }
  std::uint64_t P = 0, N = 0;
  for (bool p : positives) (p ? P : N) += 1;
  if (P == 0 || N == 0) {
    throw Error(ErrorCode::Argument, "ROC needs both positive and negative labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of 1/(P*N), kept exact.
  std::uint64_t area2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (positives[order[i]] ? dtp : dfp) += 1;
      ++i;
    }
    area2 += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P)});
  }
  curve.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
  return curve;
}

RocCurve roc(std::span<const double> scores, std::span<const BinaryClass> labels) {
  // std::vector<bool> has no contiguous storage to span over.
  std::unique_ptr<bool[]> flags(new bool[labels.size()]);
  for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] == BinaryClass::Coin;
  return roc(scores, std::span<const bool>(flags.get(), labels.size()));
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> texts_of(const LabeledCorpus& corpus, std::span<const std::size_t> idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus[i].text);
  return out;
}

}  // namespace

CvReport cross_validate(const ml::AlgorithmSpec& spec, const LabeledCorpus& corpus,
                        const features::FeatureConfig& config, const CvOptions& options) {
  spec.validate();
  config.validate();
  const auto start = Clock::now();
  const auto folds = stratified_folds(corpus, options.k, options.seed);
  const auto labels = corpus.labels();
  const auto names = label_names(corpus.granularity());
  const bool two_class = corpus.granularity() == Granularity::Two;

  std::optional<features::FeatureModel> shared;
  if (options.fit_features_on_full_corpus) {
    std::vector<std::string> all;
    for (const auto& s : corpus.sentences()) all.push_back(s.text);
    shared = features::FeatureModel::fit(all, config, options.lexicons, options.stopwords);
  }

  CvReport report;
  report.spec = spec;
  report.features = config;
  report.granularity = corpus.granularity();
  report.k = options.k;
  report.seed = options.seed;
  report.fit_features_on_full_corpus = options.fit_features_on_full_corpus;
  report.folds.resize(static_cast<std::size_t>(options.k));
  report.predictions.assign(corpus.size(), 0);
  std::vector<double> coin_scores(corpus.size(), 0.0);

  parallel_for(static_cast<std::size_t>(options.k), options.threads, [&](std::size_t f) {
    const auto fold_start = Clock::now();
    const int fold = static_cast<int>(f);
    try {
      const auto train_idx = folds.complement(fold);
      const auto test_idx = folds.members(fold);
      const auto train_texts = texts_of(corpus, train_idx);
      const auto test_texts = texts_of(corpus, test_idx);
      const auto fm = shared ? *shared
                             : features::FeatureModel::fit(train_texts, config, options.lexicons,
                                                           options.stopwords);
      const bool counts = spec.uses_counts();
      const auto train_m = counts ? fm.count_matrix(train_texts) : fm.tfidf_matrix(train_texts);
      const auto test_m = counts ? fm.count_matrix(test_texts) : fm.tfidf_matrix(test_texts);
      std::vector<int> train_labels;
      for (auto i : train_idx) train_labels.push_back(labels[i]);
      const auto model = ml::fit(spec, train_m, train_labels);
      const auto& classes = model.classes();
      const auto coin_pos = std::find(classes.begin(), classes.end(), 0) - classes.begin();

      std::vector<int> fold_pred, fold_gold;
      for (std::size_t t = 0; t < test_idx.size(); ++t) {
        const auto p = model.predict(test_m.rows[t]);
        report.predictions[test_idx[t]] = p.label;
        fold_pred.push_back(p.label);
        fold_gold.push_back(labels[test_idx[t]]);
        if (two_class) {
          const auto s = model.score(test_m.rows[t]).scores;
          coin_scores[test_idx[t]] = static_cast<std::size_t>(coin_pos) < s.size()
                                         ? s[coin_pos]
                                         : -std::numeric_limits<double>::infinity();
        }
      }
      auto& fr = report.folds[f];
      fr.fold = fold;
      fr.train_size = train_idx.size();
      fr.test_size = test_idx.size();
      fr.vocabulary_size = fm.dimension();
      fr.metrics = metrics(confusion(fold_pred, fold_gold, names));
      fr.seconds = seconds_since(fold_start);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(fold) + ": " + e.what());
    }
  });

  report.confusion = confusion(report.predictions, labels, names);
  report.aggregate = metrics(report.confusion);
  if (two_class) {
    std::vector<BinaryClass> bin(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) bin[i] = static_cast<BinaryClass>(labels[i]);
    const bool has_pos = std::find(bin.begin(), bin.end(), BinaryClass::Coin) != bin.end();
    const bool has_neg = std::find(bin.begin(), bin.end(), BinaryClass::NotCoin) != bin.end();
    if (has_pos && has_neg) report.roc = roc(coin_scores, std::span<const BinaryClass>(bin));
  }
  report.seconds = seconds_since(start);
  return report;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (const auto& [name, values] : parameters) n *= values.size();
  return n;
}

std::vector<std::pair<std::string, std::string>> Grid::point(std::size_t i) const {
  std::vector<std::pair<std::string, std::string>> out(parameters.size());
  for (std::size_t p = parameters.size(); p-- > 0;) {
    const auto& values = parameters[p].second;
    out[p] = {parameters[p].first, values[i % values.size()]};
    i /= values.size();
  }
  return out;
}

void Grid::validate() const {
  if (parameters.empty()) throw Error(ErrorCode::Argument, "grid has no parameters");
  const auto names = ml::parameter_names(family);
  auto probe = ml::default_spec(family);
  for (const auto& [name, values] : parameters) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw Error(ErrorCode::Argument, "unknown parameter '" + name + "' for family " +
                                           std::string(ml::to_string(family)));
    }
    if (values.empty()) {
      throw Error(ErrorCode::Argument, "parameter '" + name + "' has an empty value list");
    }
    for (const auto& v : values) ml::set_parameter(probe, name, v);
  }
}

Grid parse_grid(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string() || !j.contains("grid") ||
      !j["grid"].is_object()) {
    throw Error(ErrorCode::Parse, "grid file needs a 'family' string and a 'grid' object");
  }
  const auto name = j["family"].get<std::string>();
  const auto family = ml::parse_family(name);
  if (!family) throw Error(ErrorCode::Argument, "unknown algorithm family '" + name + "'");
  Grid g;
  g.family = *family;
  for (const auto& [param, list] : j["grid"].items()) {
    if (!list.is_array()) throw Error(ErrorCode::Parse, "grid entry '" + param + "' must be a list");
    std::vector<std::string> values;
    for (const auto& v : list) values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    g.parameters.emplace_back(param, std::move(values));
  }
  g.validate();
  return g;
}

Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read grid file " + path.string());
  try {
    return parse_grid(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, "grid file " + path.string() + ": " + e.what());
  }
}

const Trial& GridSearchResult::best_trial() const {
  if (!best) throw Error(ErrorCode::SearchFailed, "grid search has no successful trial");
  return trials.at(*best);
}

GridSearchResult grid_search(const Grid& grid, const LabeledCorpus& corpus,
                             const features::FeatureConfig& config, const SearchOptions& options) {
  grid.validate();
  auto base = options.base.value_or(ml::default_spec(grid.family));
  if (base.family != grid.family) {
    throw Error(ErrorCode::Argument, "base spec family does not match the grid family");
  }
  GridSearchResult result;
  result.grid = grid;
  result.k = options.cv.k;
  result.seed = options.cv.seed;
  result.trials.resize(grid.size());
  std::mutex report_mutex;
  CvOptions cv = options.cv;
  cv.threads = 1;

  parallel_for(grid.size(), options.threads, [&](std::size_t i) {
    const auto start = Clock::now();
    Trial& t = result.trials[i];
    t.index = i;
    t.assignment = grid.point(i);
    t.spec = base;
    try {
      for (const auto& [name, value] : t.assignment) ml::set_parameter(t.spec, name, value);
      t.aggregate = cross_validate(t.spec, corpus, config, cv).aggregate;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    t.seconds = seconds_since(start);
    if (options.on_trial) {
      std::lock_guard lock(report_mutex);
      options.on_trial(t);
    }
  });

  for (const auto& t : result.trials) {
    if (!t.aggregate) continue;
    if (!result.best || t.aggregate->f_measure > result.trials[*result.best].aggregate->f_measure) {
      result.best = t.index;
    }
  }
  if (!result.best) throw SearchFailed(std::move(result));
  return result;
}

ordered_json to_json(const Metrics& m) {
  ordered_json per = ordered_json::array();
  for (const auto& c : m.per_class) {
    per.push_back({{"class", c.name},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"f_measure", c.f_measure},
                   {"support", c.support}});
  }
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f_measure", m.f_measure},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f_measure", m.macro_f_measure},
          {"per_class", per}};
}

ordered_json to_json(const ConfusionMatrix& cm) {
  return {{"classes", cm.classes}, {"counts", cm.counts}};
}

ordered_json to_json(const RocCurve& r) {
  ordered_json pts = ordered_json::array();
  for (const auto& p : r.points) pts.push_back({p.fpr, p.tpr});
  return {{"auc", r.auc}, {"points", pts}};
}

namespace {

ordered_json spec_json(const ml::AlgorithmSpec& s) {
  return ordered_json::parse(ml::to_json(s).dump());
}

ordered_json features_json(const features::FeatureConfig& c) {
  return {{"nmax", c.nmax}, {"min_df", c.min_df}, {"use_pattern_lexicons", c.use_pattern_lexicons}};
}

}  // namespace

ordered_json to_json(const CvReport& r) {
  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"test_size", f.test_size},
                     {"vocabulary_size", f.vocabulary_size},
                     {"seconds", f.seconds},
                     {"metrics", to_json(f.metrics)}});
  }
  ordered_json j;
  j["spec"] = spec_json(r.spec);
  j["features"] = features_json(r.features);
  j["granularity"] = to_string(r.granularity);
  j["k"] = r.k;
  j["seed"] = r.seed;
  j["fit_features_on_full_corpus"] = r.fit_features_on_full_corpus;
  j["folds"] = folds;
  j["aggregate"] = to_json(r.aggregate);
  j["confusion"] = to_json(r.confusion);
  j["roc"] = r.roc ? to_json(*r.roc) : ordered_json(nullptr);
  j["seconds"] = r.seconds;
  return j;
}

ordered_json to_json(const GridSearchResult& r) {
  ordered_json grid = ordered_json::object();
  for (const auto& [name, values] : r.grid.parameters) grid[name] = values;
  ordered_json trials = ordered_json::array();
  for (const auto& t : r.trials) {
    ordered_json assignment = ordered_json::object();
    for (const auto& [name, value] : t.assignment) assignment[name] = value;
    ordered_json tj;
    tj["index"] = t.index;
    tj["assignment"] = assignment;
    tj["spec"] = spec_json(t.spec);
    tj["aggregate"] = t.aggregate ? to_json(*t.aggregate) : ordered_json(nullptr);
    tj["error"] = t.error ? ordered_json(*t.error) : ordered_json(nullptr);
    tj["seconds"] = t.seconds;
    trials.push_back(std::move(tj));
  }
  ordered_json j;
  j["family"] = ml::to_string(r.grid.family);
  j["grid"] = grid;
  j["k"] = r.k;
  j["seed"] = r.seed;
  j["trial_count"] = r.trials.size();
  j["best_index"] = r.best ? ordered_json(*r.best) : ordered_json(nullptr);
  j["best_spec"] = r.best ? spec_json(r.trials[*r.best].spec) : ordered_json(nullptr);
  j["trials"] = trials;
  return j;
}

std::string format_table(const CvReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %10s %10s %10s %8s\n", "Class", "Precision", "Recall",
                "F-measure", "Support");
  out << line;
  for (const auto& c : r.aggregate.per_class) {
    std::snprintf(line, sizeof line, "%-22s %9.1f%% %9.1f%% %9.1f%% %8llu\n", c.name.c_str(),
                  100 * c.precision, 100 * c.recall, 100 * c.f_measure,
                  static_cast<unsigned long long>(c.support));
    out << line;
  }
  const std::string algo = std::string(ml::to_string(r.spec.family)) + " (weighted)";
  std::snprintf(line, sizeof line, "%-22s %9.1f%% %9.1f%% %9.1f%% %8llu\n", algo.c_str(),
                100 * r.aggregate.precision, 100 * r.aggregate.recall,
                100 * r.aggregate.f_measure, static_cast<unsigned long long>(r.confusion.total()));
  out << line;
  std::snprintf(line, sizeof line, "accuracy %.1f%%  k=%d  seed=%llu\n", 100 * r.aggregate.accuracy,
                r.k, static_cast<unsigned long long>(r.seed));
  out << line;
  if (r.roc) {
    std::snprintf(line, sizeof line, "AUC (COIN vs Not-COIN) %.4f\n", r.roc->auc);
    out << line;
  }
  return out.str();
}

}  // namespace coiner::eval
