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

namespace coiner {

// Declaration order is the canonical order used for tie-breaking everywhere.
enum class CoinClass : std::uint8_t {
  NotCoin,
  Dynamic,
  Semantic,
  Syntax,
  Structure,
  Context,
  Quality,
};

inline constexpr std::array<CoinClass, 7> kAllCoinClasses = {
    CoinClass::NotCoin,   CoinClass::Dynamic, CoinClass::Semantic,
    CoinClass::Syntax,    CoinClass::Structure, CoinClass::Context,
    CoinClass::Quality};

enum class BinaryClass : std::uint8_t { Coin, NotCoin };

enum class Granularity { Seven, Two };

std::string_view to_string(CoinClass c);
std::string_view to_string(BinaryClass c);
std::string_view to_string(Granularity g);
std::optional<CoinClass> parse_coin_class(std::string_view name);
std::optional<Granularity> parse_granularity(std::string_view name);

constexpr BinaryClass project(CoinClass c) {
  return c == CoinClass::NotCoin ? BinaryClass::NotCoin : BinaryClass::Coin;
}

// Label names of a granularity, indexed by label id.
std::vector<std::string> label_names(Granularity g);

struct LabeledSentence {
  std::string id;
  std::string api;
  std::string text;
  CoinClass label7 = CoinClass::NotCoin;
  std::optional<std::string> retrieved;

  bool operator==(const LabeledSentence&) const = default;
};

class LabeledCorpus {
 public:
  LabeledCorpus() = default;
  // Throws Error(Integrity) for duplicate ids and Error(Parse) for empty or
  // multi-line text.
  LabeledCorpus(std::vector<LabeledSentence> sentences,
                Granularity granularity = Granularity::Seven);

  const std::vector<LabeledSentence>& sentences() const { return sentences_; }
  Granularity granularity() const { return granularity_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  const LabeledSentence& operator[](std::size_t i) const {
    return sentences_[i];
  }

  // Label id of sentence i at this corpus' granularity.
  int label(std::size_t i) const;
  std::vector<int> labels() const;
  std::size_t num_classes() const;

  LabeledCorpus with_granularity(Granularity g) const;

  // Stable 64-bit FNV-1a digest over ids, texts and seven-class labels.
  std::uint64_t fingerprint() const;

  bool operator==(const LabeledCorpus&) const = default;

 private:
  std::vector<LabeledSentence> sentences_;
  Granularity granularity_ = Granularity::Seven;
};

LabeledCorpus load_corpus(const std::filesystem::path& path,
                          Granularity granularity = Granularity::Seven);
LabeledCorpus parse_corpus(std::string_view jsonl,
                           Granularity granularity = Granularity::Seven);
void save_corpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& path);
std::string format_corpus(const LabeledCorpus& corpus);

LabeledCorpus project_two_class(const LabeledCorpus& corpus);

struct ClassShare {
  std::string name;
  std::size_t count = 0;
  double fraction = 0.0;
};

std::vector<ClassShare> class_distribution(const LabeledCorpus& corpus);

struct FoldAssignment {
  int k = 0;
  // Fold index per sentence, aligned with corpus order.
  std::vector<int> fold_of;
  std::unordered_map<std::string, int> by_id;

  std::vector<std::size_t> members(int fold) const;
  std::vector<std::size_t> complement(int fold) const;
};

FoldAssignment stratified_folds(const LabeledCorpus& corpus, int k,
                                std::uint64_t seed);

// Labelled toy corpus generator: each class draws from its own vocabulary and
// a shared noise pool supplies round(noise_fraction * words) tokens of every
// sentence.
struct SyntheticCorpusSpec {
  std::size_t per_class = 100;
  std::size_t words_per_sentence = 10;
  std::size_t vocabulary_per_class = 30;
  std::size_t noise_vocabulary = 60;
  double noise_fraction = 0.2;
  std::uint64_t seed = 42;
};

LabeledCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

}  // namespace coiner
