#include "coiner/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "coiner/error.hpp"

namespace coiner::features {

namespace {

std::vector<std::string> lexicon_file(const std::filesystem::path& dir,
                                      const char* name) {
  std::vector<std::string> words;
  for (auto& w : text::read_word_list(dir / name)) {
    words.push_back(text::to_lower_ascii(w));
  }
  return words;
}

bool hits(const std::vector<std::string>& lexicon,
          const std::vector<std::string>& lowered_tokens) {
  std::unordered_set<std::string> entries;
  for (const auto& w : lexicon) {
    entries.insert(w);
    entries.insert(text::stem(w));
  }
  for (const auto& t : lowered_tokens) {
    if (entries.contains(t) || entries.contains(text::stem(t))) return true;
  }
  return false;
}

}  // namespace

void FeatureConfig::validate() const {
  if (nmax < 1 || nmax > 3) {
    throw Error(ErrorCode::Config, "nmax must be in [1, 3], got " + std::to_string(nmax));
  }
  if (min_df < 1) {
    throw Error(ErrorCode::Config, "min_df must be >= 1, got " + std::to_string(min_df));
  }
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  auto a = entries.begin();
  auto b = other.entries.begin();
  while (a != entries.end() && b != other.entries.end()) {
    if (a->index < b->index) {
      ++a;
    } else if (b->index < a->index) {
      ++b;
    } else {
      s += a->value * b->value;
      ++a;
      ++b;
    }
  }
  return s;
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& e : entries) {
    if (e.index < dense.size()) s += e.value * dense[e.index];
  }
  return s;
}

SparseVector SparseVector::from_pairs(std::size_t dimension,
                                      std::vector<SparseEntry> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  SparseVector v;
  v.dimension = dimension;
  for (const auto& p : pairs) {
    if (!v.entries.empty() && v.entries.back().index == p.index) {
      v.entries.back().value += p.value;
    } else {
      v.entries.push_back(p);
    }
  }
  std::erase_if(v.entries, [](const SparseEntry& e) { return e.value == 0.0; });
  return v;
}

Vocabulary::Vocabulary(std::vector<std::string> features)
    : features_(std::move(features)) {
  index_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!index_.emplace(features_[i], static_cast<std::uint32_t>(i)).second) {
      throw Error(ErrorCode::Integrity, "duplicate vocabulary feature '" + features_[i] + "'");
    }
  }
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view feature) const {
  auto it = index_.find(std::string(feature));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PatternLexicons PatternLexicons::defaults() {
  PatternLexicons lex;
  lex.action_verbs = {"access",  "acquire", "call",     "cancel",    "close",
                      "create",  "delete",  "execute",  "initialize", "invoke",
                      "load",    "lock",    "manipulate", "modify",  "notify",
                      "open",    "read",    "register", "release",   "remove",
                      "request", "save",    "start",    "stop",      "subscribe",
                      "trigger", "unlock",  "update",   "wait",      "write"};
  lex.technical_keywords = {"ajax", "android", "api",  "css",   "html",  "http",
                            "https", "ios",    "jar",  "java",  "javascript",
                            "json", "oauth",   "rest", "sdk",   "soap",  "sql",
                            "swift", "uri",    "url",  "windows", "xml", "xpath"};
  lex.io_terms = {"accept", "deliver", "emit",    "input", "output", "pass",
                  "receive", "respond", "response", "result", "return", "send"};
  lex.goal_terms = {"aim",    "allow",   "enable", "ensure", "facilitate",
                    "help",   "let",     "permit", "provide", "purpose",
                    "support"};
  lex.conditional_markers = {"after", "before", "if",    "once",    "unless",
                             "until", "upon",   "when",  "whenever", "while"};
  return lex;
}

PatternLexicons PatternLexicons::from_directory(const std::filesystem::path& dir) {
  PatternLexicons lex;
  lex.action_verbs = lexicon_file(dir, "action_verbs.txt");
  lex.technical_keywords = lexicon_file(dir, "technical_keywords.txt");
  lex.io_terms = lexicon_file(dir, "io_terms.txt");
  lex.goal_terms = lexicon_file(dir, "goal_terms.txt");
  lex.conditional_markers = lexicon_file(dir, "conditional_markers.txt");
  return lex;
}

std::vector<std::string> extract_features(const text::TermSequence& terms,
                                          const FeatureConfig& config) {
  std::vector<std::string> out;
  const auto& t = terms.terms;
  for (int n = 1; n <= config.nmax; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (t.size() < un) break;
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      std::string f = t[i];
      for (std::size_t j = 1; j < un; ++j) {
        f += ' ';
        f += t[i + j];
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const text::TermSequence> documents,
                            const FeatureConfig& config) {
  config.validate();
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    auto feats = extract_features(doc, config);
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
    for (auto& f : feats) ++df[std::move(f)];
  }
  std::vector<std::string> kept;
  for (const auto& [feature, count] : df) {
    if (count >= static_cast<std::size_t>(config.min_df)) kept.push_back(feature);
  }
  if (kept.empty()) {
    throw Error(ErrorCode::Config,
                "empty vocabulary: no feature reaches min_df = " +
                    std::to_string(config.min_df));
  }
  return Vocabulary(std::move(kept));
}

IdfTable fit_idf(const DocTermMatrix& counts) {
  IdfTable table;
  table.documents = counts.size();
  table.document_frequency.assign(counts.dimension, 0);
  for (const auto& row : counts.rows) {
    for (const auto& e : row.entries) ++table.document_frequency[e.index];
  }
  const double n = static_cast<double>(table.documents);
  table.idf.resize(counts.dimension);
  for (std::size_t i = 0; i < counts.dimension; ++i) {
    const double df = table.document_frequency[i];
    table.idf[i] = std::log((1.0 + n) / (1.0 + df)) + 1.0;
  }
  return table;
}

SparseVector tfidf_transform(const SparseVector& counts, const IdfTable& idf) {
  if (counts.dimension != idf.idf.size()) {
    throw Error(ErrorCode::Argument, "count vector dimension " +
                                         std::to_string(counts.dimension) +
                                         " does not match idf table " +
                                         std::to_string(idf.idf.size()));
  }
  SparseVector out;
  out.dimension = counts.dimension;
  out.entries.reserve(counts.entries.size());
  for (const auto& e : counts.entries) {
    out.entries.push_back({e.index, e.value * idf.idf[e.index]});
  }
  const double n = out.norm();
  if (n > 0.0) {
    for (auto& e : out.entries) e.value /= n;
  }
  return out;
}

std::vector<std::string> pattern_features(std::string_view sentence,
                                          const text::TermSequence& terms,
                                          const PatternLexicons& lexicons) {
  std::vector<std::string> lowered;
  for (const auto& tok : text::tokenize(sentence)) {
    lowered.push_back(text::to_lower_ascii(tok));
  }
  for (const auto& t : terms.terms) lowered.push_back(t);

  std::vector<std::string> out;
  const std::array<const std::vector<std::string>*, 5> lists = {
      &lexicons.action_verbs, &lexicons.technical_keywords, &lexicons.io_terms,
      &lexicons.goal_terms, &lexicons.conditional_markers};
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (hits(*lists[i], lowered)) out.emplace_back(kPatternFeatureNames[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureModel::FeatureModel(FeatureConfig config, Vocabulary vocabulary, IdfTable idf,
                           PatternLexicons lexicons, text::StopwordList stopwords)
    : config_(config),
      vocabulary_(std::move(vocabulary)),
      idf_(std::move(idf)),
      lexicons_(std::move(lexicons)),
      stopwords_(std::move(stopwords)) {
  if (idf_.idf.size() != vocabulary_.size()) {
    throw Error(ErrorCode::Integrity, "idf table size does not match vocabulary");
  }
}

FeatureModel FeatureModel::fit(std::span<const std::string> sentences,
                               const FeatureConfig& config, PatternLexicons lexicons,
                               text::StopwordList stopwords) {
  config.validate();
  std::vector<text::TermSequence> docs;
  docs.reserve(sentences.size());
  for (const auto& s : sentences) docs.push_back(text::preprocess(s, stopwords));

  Vocabulary ngrams = build_vocabulary(docs, config);
  std::vector<std::string> columns = ngrams.features();
  if (config.use_pattern_lexicons) {
    for (auto name : kPatternFeatureNames) columns.emplace_back(name);
  }
  FeatureModel model;
  model.config_ = config;
  model.vocabulary_ = Vocabulary(std::move(columns));
  model.lexicons_ = std::move(lexicons);
  model.stopwords_ = std::move(stopwords);
  model.idf_.idf.assign(model.vocabulary_.size(), 1.0);

  DocTermMatrix counts;
  counts.dimension = model.vocabulary_.size();
  counts.rows.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::vector<SparseEntry> pairs;
    for (const auto& f : extract_features(docs[i], config)) {
      if (auto idx = model.vocabulary_.find(f)) pairs.push_back({*idx, 1.0});
    }
    if (config.use_pattern_lexicons) {
      for (const auto& f : pattern_features(sentences[i], docs[i], model.lexicons_)) {
        pairs.push_back({*model.vocabulary_.find(f), 1.0});
      }
    }
    counts.rows.push_back(SparseVector::from_pairs(counts.dimension, std::move(pairs)));
  }
  model.idf_ = fit_idf(counts);
  return model;
}

text::TermSequence FeatureModel::preprocess(std::string_view sentence) const {
  return text::preprocess(sentence, stopwords_);
}

SparseVector FeatureModel::counts(std::string_view sentence) const {
  const auto terms = preprocess(sentence);
  std::vector<SparseEntry> pairs;
  for (const auto& f : extract_features(terms, config_)) {
    if (auto idx = vocabulary_.find(f)) pairs.push_back({*idx, 1.0});
  }
  if (config_.use_pattern_lexicons) {
    for (const auto& f : pattern_features(sentence, terms, lexicons_)) {
      if (auto idx = vocabulary_.find(f)) pairs.push_back({*idx, 1.0});
    }
  }
  return SparseVector::from_pairs(vocabulary_.size(), std::move(pairs));
}

SparseVector FeatureModel::tfidf(std::string_view sentence) const {
  return tfidf_transform(counts(sentence), idf_);
}

DocTermMatrix FeatureModel::count_matrix(std::span<const std::string> sentences) const {
  DocTermMatrix m;
  m.dimension = dimension();
  m.rows.reserve(sentences.size());
  for (const auto& s : sentences) m.rows.push_back(counts(s));
  return m;
}

DocTermMatrix FeatureModel::tfidf_matrix(std::span<const std::string> sentences) const {
  DocTermMatrix m;
  m.dimension = dimension();
  m.rows.reserve(sentences.size());
  for (const auto& s : sentences) m.rows.push_back(tfidf(s));
  return m;
}

}  // namespace coiner::features
