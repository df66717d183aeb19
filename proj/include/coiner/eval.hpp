#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coiner/classifiers.hpp"
#include "coiner/corpus.hpp"
#include "coiner/error.hpp"
#include "coiner/features.hpp"
#include "json.hpp"

namespace coiner::eval {

// counts[actual][predicted] over label ids 0..classes.size()-1.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws Error(Argument) on length mismatch, empty input or ids out of range.
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> gold,
                          std::vector<std::string> classes);

// 2PR / (P + R), 0 when P + R = 0.
double f_measure(double precision, double recall);

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::uint64_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct Metrics {
  std::vector<ClassMetrics> per_class;
  // Support-weighted averages.
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f_measure = 0.0;
  double accuracy = 0.0;

  bool operator==(const Metrics&) const = default;
};

Metrics metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;

  bool operator==(const RocCurve&) const = default;
};

// positives[i] marks the positive class. One point per distinct threshold,
// descending; tied scores form a single segment. Throws Error(Argument) when
// only one class is present or lengths differ.
RocCurve roc(std::span<const double> scores, std::span<const bool> positives);
RocCurve roc(std::span<const double> scores, std::span<const BinaryClass> labels);

struct FoldReport {
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t vocabulary_size = 0;
  Metrics metrics;
  double seconds = 0.0;
};

struct CvOptions {
  int k = 10;
  std::uint64_t seed = 42;
  // Fit vocabulary and idf on the whole corpus before splitting. Leaks test
  // folds into the features; only for comparison runs.
  bool fit_features_on_full_corpus = false;
  // 0 = hardware concurrency.
  unsigned threads = 1;
  features::PatternLexicons lexicons = features::PatternLexicons::defaults();
  text::StopwordList stopwords = text::default_stopwords();
};

struct CvReport {
  ml::AlgorithmSpec spec;
  features::FeatureConfig features;
  Granularity granularity = Granularity::Seven;
  int k = 0;
  std::uint64_t seed = 0;
  bool fit_features_on_full_corpus = false;
  std::vector<FoldReport> folds;
  ConfusionMatrix confusion;
  Metrics aggregate;
  // Two-class corpora only; COIN is the positive class.
  std::optional<RocCurve> roc;
  // Pooled out-of-fold predictions in corpus order.
  std::vector<int> predictions;
  double seconds = 0.0;
};

// Errors from a fold are rethrown with the same code and "fold i: " prefixed.
CvReport cross_validate(const ml::AlgorithmSpec& spec, const LabeledCorpus& corpus,
                        const features::FeatureConfig& config, const CvOptions& options = {});

// Ordered parameter -> values; enumeration varies the last parameter fastest.
struct Grid {
  ml::Family family = ml::Family::LinearSVM;
  std::vector<std::pair<std::string, std::vector<std::string>>> parameters;

  std::size_t size() const;
  // Combination at enumeration index i as (name, value) pairs.
  std::vector<std::pair<std::string, std::string>> point(std::size_t i) const;
  // Throws Error(Argument) for unknown parameter names or empty value lists.
  void validate() const;
};

// {"family": "...", "grid": {"C": [0.1, 1], "loss": ["hinge"]}}; key order is
// kept. Throws Error(Parse) or Error(Argument).
Grid parse_grid(const nlohmann::ordered_json& j);
Grid load_grid(const std::filesystem::path& path);

struct Trial {
  std::size_t index = 0;
  ml::AlgorithmSpec spec;
  std::vector<std::pair<std::string, std::string>> assignment;
  std::optional<Metrics> aggregate;
  std::optional<std::string> error;
  double seconds = 0.0;
};

struct GridSearchResult {
  Grid grid;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<Trial> trials;
  std::optional<std::size_t> best;

  const Trial& best_trial() const;
};

class SearchFailed : public Error {
 public:
  explicit SearchFailed(GridSearchResult result)
      : Error(ErrorCode::SearchFailed, "every grid-search trial failed"),
        result_(std::move(result)) {}
  const GridSearchResult& result() const { return result_; }

 private:
  GridSearchResult result_;
};

struct SearchOptions {
  CvOptions cv;
  // Base spec whose non-grid parameters apply to every trial. Its family must
  // match the grid's.
  std::optional<ml::AlgorithmSpec> base;
  // Trials run concurrently when > 1; 0 = hardware concurrency.
  unsigned threads = 1;
  std::function<void(const Trial&)> on_trial;
};

// Best = highest weighted F, ties to the earliest trial. Throws SearchFailed
// when no trial succeeds.
GridSearchResult grid_search(const Grid& grid, const LabeledCorpus& corpus,
                             const features::FeatureConfig& config,
                             const SearchOptions& options = {});

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// by index is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

nlohmann::ordered_json to_json(const Metrics& m);
nlohmann::ordered_json to_json(const ConfusionMatrix& cm);
nlohmann::ordered_json to_json(const RocCurve& r);
nlohmann::ordered_json to_json(const CvReport& r);
nlohmann::ordered_json to_json(const GridSearchResult& r);

// Table of per-class and weighted precision/recall/F.
std::string format_table(const CvReport& r);

}  // namespace coiner::eval
