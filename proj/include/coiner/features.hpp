#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coiner/textproc.hpp"

namespace coiner::features {

struct FeatureConfig {
  int nmax = 3;
  int min_df = 1;
  bool use_pattern_lexicons = false;

  // Throws Error(Config) when out of range.
  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

struct SparseEntry {
  std::uint32_t index;
  double value;

  bool operator==(const SparseEntry&) const = default;
};

// Entries sorted by strictly increasing index; values finite and nonzero.
struct SparseVector {
  std::size_t dimension = 0;
  std::vector<SparseEntry> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
  double dot(const SparseVector& other) const;
  double dot(std::span<const double> dense) const;
  // Builds from unsorted (index, value) pairs, summing duplicates and dropping
  // zeros.
  static SparseVector from_pairs(std::size_t dimension,
                                 std::vector<SparseEntry> pairs);

  bool operator==(const SparseVector&) const = default;
};

struct DocTermMatrix {
  std::size_t dimension = 0;
  std::vector<SparseVector> rows;

  std::size_t size() const { return rows.size(); }
};

// Feature strings (n-grams joined by a single space) with lexicographic column
// order; pattern-flag columns, when present, follow the n-gram columns.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> features);

  std::size_t size() const { return features_.size(); }
  std::optional<std::uint32_t> find(std::string_view feature) const;
  const std::string& feature(std::uint32_t index) const { return features_[index]; }
  const std::vector<std::string>& features() const { return features_; }

  bool operator==(const Vocabulary& other) const { return features_ == other.features_; }

 private:
  std::vector<std::string> features_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct IdfTable {
  std::size_t documents = 0;
  std::vector<std::uint32_t> document_frequency;
  std::vector<double> idf;

  bool operator==(const IdfTable&) const = default;
};

struct PatternLexicons {
  std::vector<std::string> action_verbs;
  std::vector<std::string> technical_keywords;
  std::vector<std::string> io_terms;
  std::vector<std::string> goal_terms;
  std::vector<std::string> conditional_markers;

  static PatternLexicons defaults();
  // Reads action_verbs.txt, technical_keywords.txt, io_terms.txt,
  // goal_terms.txt and conditional_markers.txt from dir.
  static PatternLexicons from_directory(const std::filesystem::path& dir);

  bool operator==(const PatternLexicons&) const = default;
};

inline constexpr std::array<std::string_view, 5> kPatternFeatureNames = {
    "#has_action_verb", "#has_technical_keyword", "#has_io_term",
    "#has_goal_term", "#has_conditional"};

// Every contiguous n-gram for n = 1..nmax, in sentence order by n.
std::vector<std::string> extract_features(const text::TermSequence& terms,
                                          const FeatureConfig& config);

// Throws Error(Config) if no feature reaches min_df.
Vocabulary build_vocabulary(std::span<const text::TermSequence> documents,
                            const FeatureConfig& config);

// idf(f) = ln((1 + N) / (1 + df(f))) + 1
IdfTable fit_idf(const DocTermMatrix& counts);

// count * idf, then L2-normalised; zero vectors stay zero.
SparseVector tfidf_transform(const SparseVector& counts, const IdfTable& idf);

// Sorted names of the pattern flags that fire for the sentence.
std::vector<std::string> pattern_features(std::string_view sentence,
                                          const text::TermSequence& terms,
                                          const PatternLexicons& lexicons);

// The fitted feature substrate: vocabulary, idf weights and the
// preprocessing resources needed to vectorise new sentences.
class FeatureModel {
 public:
  FeatureModel() = default;
  FeatureModel(FeatureConfig config, Vocabulary vocabulary, IdfTable idf,
               PatternLexicons lexicons, text::StopwordList stopwords);

  static FeatureModel fit(std::span<const std::string> sentences,
                          const FeatureConfig& config,
                          PatternLexicons lexicons = PatternLexicons::defaults(),
                          text::StopwordList stopwords = text::default_stopwords());

  text::TermSequence preprocess(std::string_view sentence) const;
  SparseVector counts(std::string_view sentence) const;
  SparseVector tfidf(std::string_view sentence) const;
  DocTermMatrix count_matrix(std::span<const std::string> sentences) const;
  DocTermMatrix tfidf_matrix(std::span<const std::string> sentences) const;

  const FeatureConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const IdfTable& idf() const { return idf_; }
  const PatternLexicons& lexicons() const { return lexicons_; }
  const text::StopwordList& stopwords() const { return stopwords_; }
  std::size_t dimension() const { return vocabulary_.size(); }

 private:
  FeatureConfig config_;
  Vocabulary vocabulary_;
  IdfTable idf_;
  PatternLexicons lexicons_;
  text::StopwordList stopwords_;
};

}  // namespace coiner::features
