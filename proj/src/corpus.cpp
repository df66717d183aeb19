#include "coiner/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "coiner/error.hpp"
#include "coiner/random.hpp"

namespace coiner {

namespace {

constexpr std::array<std::string_view, 7> kCoinNames = {
    "Not-COIN", "Dynamic", "Semantic", "Syntax",
    "Structure", "Context", "Quality"};

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
           c == '\v';
  });
}

void check_text(const std::string& text, const std::string& where) {
  if (blank(text)) {
    throw Error(ErrorCode::Parse, where + ": empty sentence text");
  }
  if (text.find_first_of("\r\n") != std::string::npos) {
    throw Error(ErrorCode::Parse, where + ": sentence text contains a line break");
  }
}

std::string required_string(const nlohmann::json& rec, const char* key,
                            std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) +
                                      ": missing or non-string field '" + key +
                                      "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(CoinClass c) {
  return kCoinNames[static_cast<std::size_t>(c)];
}

std::string_view to_string(BinaryClass c) {
  return c == BinaryClass::Coin ? "COIN" : "Not-COIN";
}

std::string_view to_string(Granularity g) {
  return g == Granularity::Seven ? "seven" : "two";
}

std::optional<CoinClass> parse_coin_class(std::string_view name) {
  for (std::size_t i = 0; i < kCoinNames.size(); ++i) {
    if (kCoinNames[i] == name) return static_cast<CoinClass>(i);
  }
  return std::nullopt;
}

std::optional<Granularity> parse_granularity(std::string_view name) {
  if (name == "seven" || name == "7") return Granularity::Seven;
  if (name == "two" || name == "2") return Granularity::Two;
  return std::nullopt;
}

std::vector<std::string> label_names(Granularity g) {
  if (g == Granularity::Two) return {"COIN", "Not-COIN"};
  return {kCoinNames.begin(), kCoinNames.end()};
}

LabeledCorpus::LabeledCorpus(std::vector<LabeledSentence> sentences,
                             Granularity granularity)
    : sentences_(std::move(sentences)), granularity_(granularity) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(sentences_.size());
  for (const auto& s : sentences_) {
    if (!seen.insert(s.id).second) {
      throw Error(ErrorCode::Integrity, "duplicate sentence id '" + s.id + "'");
    }
    check_text(s.text, "sentence '" + s.id + "'");
  }
}

int LabeledCorpus::label(std::size_t i) const {
  const CoinClass c = sentences_[i].label7;
  if (granularity_ == Granularity::Two) return static_cast<int>(project(c));
  return static_cast<int>(c);
}

std::vector<int> LabeledCorpus::labels() const {
  std::vector<int> out(sentences_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = label(i);
  return out;
}

std::size_t LabeledCorpus::num_classes() const {
  return granularity_ == Granularity::Two ? 2 : kAllCoinClasses.size();
}

LabeledCorpus LabeledCorpus::with_granularity(Granularity g) const {
  LabeledCorpus copy = *this;
  copy.granularity_ = g;
  return copy;
}

std::uint64_t LabeledCorpus::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : sentences_) {
    mix(s.id);
    mix(s.text);
    mix(to_string(s.label7));
  }
  return h;
}

LabeledCorpus parse_corpus(std::string_view jsonl, Granularity granularity) {
  std::vector<LabeledSentence> out;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (blank(line)) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object()) {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(line_no) + ": record is not an object");
    }
    LabeledSentence s;
    s.id = required_string(rec, "id", line_no);
    s.api = required_string(rec, "api", line_no);
    s.text = required_string(rec, "text", line_no);
    const std::string label = required_string(rec, "label7", line_no);
    if (auto r = rec.find("retrieved"); r != rec.end() && !r->is_null()) {
      if (!r->is_string()) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) +
                                          ": 'retrieved' must be a string");
      }
      s.retrieved = r->get<std::string>();
    }
    check_text(s.text, "line " + std::to_string(line_no));
    auto cls = parse_coin_class(label);
    if (!cls) {
      throw Error(ErrorCode::Label, "line " + std::to_string(line_no) +
                                        ": unknown label '" + label + "'");
    }
    s.label7 = *cls;
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::Integrity, "line " + std::to_string(line_no) +
                                            ": duplicate id '" + s.id + "'");
    }
    out.push_back(std::move(s));
  }
  return LabeledCorpus(std::move(out), granularity);
}

LabeledCorpus load_corpus(const std::filesystem::path& path,
                          Granularity granularity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open corpus file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), granularity);
}

std::string format_corpus(const LabeledCorpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    nlohmann::ordered_json rec;
    rec["id"] = s.id;
    rec["api"] = s.api;
    rec["text"] = s.text;
    rec["label7"] = std::string(to_string(s.label7));
    if (s.retrieved) rec["retrieved"] = *s.retrieved;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write corpus file " + path.string());
  }
  out << format_corpus(corpus);
  out.flush();
  if (!out) {
    throw Error(ErrorCode::Io, "write failed for " + path.string());
  }
}

LabeledCorpus project_two_class(const LabeledCorpus& corpus) {
  return corpus.with_granularity(Granularity::Two);
}

std::vector<ClassShare> class_distribution(const LabeledCorpus& corpus) {
  const auto names = label_names(corpus.granularity());
  std::vector<ClassShare> shares(names.size());
  for (std::size_t c = 0; c < names.size(); ++c) shares[c].name = names[c];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ++shares[static_cast<std::size_t>(corpus.label(i))].count;
  }
  if (!corpus.empty()) {
    const double total = static_cast<double>(corpus.size());
    for (auto& s : shares) s.fraction = static_cast<double>(s.count) / total;
  }
  return shares;
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldAssignment stratified_folds(const LabeledCorpus& corpus, int k,
                                std::uint64_t seed) {
  if (k < 2) {
    throw Error(ErrorCode::Argument, "k must be at least 2, got " +
                                         std::to_string(k));
  }
  if (static_cast<std::size_t>(k) > corpus.size()) {
    throw Error(ErrorCode::Argument,
                "k = " + std::to_string(k) + " exceeds corpus size " +
                    std::to_string(corpus.size()));
  }
  std::vector<std::vector<std::size_t>> by_class(corpus.num_classes());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    by_class[static_cast<std::size_t>(corpus.label(i))].push_back(i);
  }

  // Dealing class blocks round-robin with one running counter keeps both the
  // per-class and the overall fold sizes within one of each other.
  Rng rng(seed);
  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(corpus.size(), -1);
  std::size_t dealt = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      fa.fold_of[idx] = static_cast<int>(dealt % static_cast<std::size_t>(k));
      ++dealt;
    }
  }
  fa.by_id.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    fa.by_id.emplace(corpus[i].id, fa.fold_of[i]);
  }
  return fa;
}

LabeledCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.words_per_sentence == 0 || spec.vocabulary_per_class == 0) {
    throw Error(ErrorCode::Argument, "synthetic corpus needs words and vocabulary");
  }
  if (spec.noise_fraction < 0.0 || spec.noise_fraction > 1.0) {
    throw Error(ErrorCode::Argument, "noise_fraction must be in [0, 1]");
  }
  if (spec.noise_fraction > 0.0 && spec.noise_vocabulary == 0) {
    throw Error(ErrorCode::Argument, "noise words requested without a noise vocabulary");
  }
  // Tokens are letter prefix + number so stemming and stopword removal leave
  // them intact and distinct.
  constexpr std::array<std::string_view, 7> prefixes = {
      "nc", "dy", "se", "sy", "st", "cx", "qu"};
  Rng rng(spec.seed);
  std::vector<LabeledSentence> out;
  out.reserve(spec.per_class * kAllCoinClasses.size());
  // Exactly this many noise tokens per sentence, at random positions.
  const auto noise_count = static_cast<std::size_t>(
      std::lround(spec.noise_fraction * static_cast<double>(spec.words_per_sentence)));
  std::vector<char> is_noise(spec.words_per_sentence);
  std::size_t serial = 0;
  for (std::size_t n = 0; n < spec.per_class; ++n) {
    for (std::size_t c = 0; c < kAllCoinClasses.size(); ++c) {
      std::fill(is_noise.begin(), is_noise.end(), 0);
      std::fill_n(is_noise.begin(), noise_count, 1);
      rng.shuffle(std::span<char>(is_noise));
      std::string text;
      for (std::size_t w = 0; w < spec.words_per_sentence; ++w) {
        std::string word;
        if (is_noise[w]) {
          word = "zz" + std::to_string(rng.below(spec.noise_vocabulary));
        } else {
          word = std::string(prefixes[c]) +
                 std::to_string(rng.below(spec.vocabulary_per_class));
        }
        if (w == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
        if (!text.empty()) text += ' ';
        text += word;
      }
      text += '.';
      LabeledSentence s;
      s.id = "syn" + std::to_string(serial++);
      s.api = "synthetic";
      s.text = std::move(text);
      s.label7 = kAllCoinClasses[c];
      out.push_back(std::move(s));
    }
  }
  return LabeledCorpus(std::move(out), Granularity::Seven);
}

}  // namespace coiner
