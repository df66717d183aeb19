#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "coiner/classifiers.hpp"
#include "coiner/corpus.hpp"
#include "coiner/features.hpp"

namespace coiner {

inline constexpr int kModelFormatVersion = 1;

struct SentencePrediction {
  std::string label;
  int label_id = 0;
  double confidence = 0.0;
};

// Everything needed to classify raw sentences: feature substrate, classifier
// and provenance. Immutable once built.
class ModelBundle {
 public:
  ModelBundle() = default;
  ModelBundle(features::FeatureModel features, ml::TrainedModel classifier,
              Granularity granularity, std::uint64_t corpus_fingerprint,
              std::size_t training_size);

  // Fits features and classifier on the whole corpus.
  static ModelBundle train(const LabeledCorpus& corpus, const features::FeatureConfig& config,
                           const ml::AlgorithmSpec& spec,
                           features::PatternLexicons lexicons = features::PatternLexicons::defaults(),
                           text::StopwordList stopwords = text::default_stopwords());

  features::SparseVector vectorize(std::string_view sentence) const;
  SentencePrediction predict(std::string_view sentence) const;

  const features::FeatureModel& features() const { return features_; }
  const ml::TrainedModel& classifier() const { return classifier_; }
  Granularity granularity() const { return granularity_; }
  std::uint64_t corpus_fingerprint() const { return fingerprint_; }
  std::size_t training_size() const { return training_size_; }
  std::string fingerprint_hex() const;

  // {format_version, spec, granularity, corpus, ...}; no timestamps so equal
  // inputs serialize to equal bytes.
  std::string serialize() const;
  static ModelBundle parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ModelBundle load(const std::filesystem::path& path);

  nlohmann::json provenance() const;

 private:
  features::FeatureModel features_;
  ml::TrainedModel classifier_;
  Granularity granularity_ = Granularity::Seven;
  std::uint64_t fingerprint_ = 0;
  std::size_t training_size_ = 0;
};

}  // namespace coiner
