#include "coiner/textproc.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "coiner/error.hpp"

namespace coiner::text {

namespace {

constexpr std::array<std::string_view, 181> kStopwords = {
    "a",         "about",    "above",     "after",     "again",
    "against",   "all",      "also",      "am",        "an",
    "and",       "any",      "are",       "aren't",    "as",
    "at",        "be",       "because",   "been",      "before",
    "being",     "below",    "between",   "both",      "but",
    "by",        "can",      "cannot",    "could",     "couldn't",
    "did",       "didn't",   "do",        "does",      "doesn't",
    "doing",     "don't",    "down",      "during",    "each",
    "etc",       "few",      "for",       "from",      "further",
    "had",       "hadn't",   "has",       "hasn't",    "have",
    "haven't",   "having",   "he",        "he'd",      "he'll",
    "he's",      "her",      "here",      "here's",    "hers",
    "herself",   "him",      "himself",   "his",       "how",
    "how's",     "i",        "i'd",       "i'll",      "i'm",
    "i've",      "if",       "in",        "into",      "is",
    "isn't",     "it",       "it's",      "its",       "itself",
    "just",      "let's",    "me",        "more",      "most",
    "mustn't",   "my",       "myself",    "no",        "nor",
    "not",       "of",       "off",       "on",        "once",
    "only",      "or",       "other",     "ought",     "our",
    "ours",      "ourselves", "out",      "over",      "own",
    "same",      "shan't",   "she",       "she'd",     "she'll",
    "she's",     "should",   "shouldn't", "so",        "some",
    "such",      "than",     "that",      "that's",    "the",
    "their",     "theirs",   "them",      "themselves", "then",
    "there",     "there's",  "these",     "they",      "they'd",
    "they'll",   "they're",  "they've",   "this",      "those",
    "through",   "to",       "too",       "under",     "until",
    "up",        "very",     "was",       "wasn't",    "we",
    "we'd",      "we'll",    "we're",     "we've",     "were",
    "weren't",   "what",     "what's",    "when",      "when's",
    "where",     "where's",  "which",     "while",     "who",
    "who's",     "whom",     "why",       "why's",     "will",
    "with",      "won't",    "would",     "wouldn't",  "you",
    "you'd",     "you'll",   "you're",    "you've",    "your",
    "yours",     "yourself", "yourselves", "s",        "t",
    "can't",
};

}  // namespace

char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  }
  if (len > 1) {
    if (i + static_cast<std::size_t>(len) > s.size()) {
      ++i;
      return b0;
    }
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) {
        ++i;
        return b0;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xBF) return false;  // Latin-1 punctuation, nbsp, symbols
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x2190 && cp <= 0x2BFF) return false;  // arrows, math, boxes
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFEFF) return false;
  return true;
}

namespace {

bool is_joiner(char32_t cp) { return cp == '-' || cp == '\'' || cp == 0x2019; }

// Porter stemmer over a mutable buffer; mirrors the reference C layout.
class PorterStemmer {
 public:
  explicit PorterStemmer(std::string word) : b_(std::move(word)) {}

  std::string run() {
    if (b_.size() <= 2) return b_;
    k_ = static_cast<int>(b_.size()) - 1;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<std::size_t>(k_ + 1));
  }

 private:
  char at(int i) const { return b_[static_cast<std::size_t>(i)]; }

  bool cons(int i) const {
    switch (at(i)) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    for (;;) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    for (;;) {
      for (;;) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      for (;;) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  bool double_c(int j) const {
    if (j < 1) return false;
    if (at(j) != at(j - 1)) return false;
    return cons(j);
  }

  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = at(i);
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (std::string_view(b_).substr(static_cast<std::size_t>(k_ - len + 1),
                                    s.size()) != s) {
      return false;
    }
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<std::size_t>(j_ + 1),
               static_cast<std::size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void r(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  void step1ab() {
    if (at(k_) == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (at(k_ - 1) != 's') {
        --k_;
      }
    }
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_c(k_)) {
        --k_;
        const char ch = at(k_);
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else if (m() == 1 && cvc(k_)) {
        set_to("e");
      }
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
  }

  // Tries each (suffix, replacement) in order; stops at the first suffix match.
  template <std::size_t N>
  void replace_first(const std::array<std::pair<std::string_view, std::string_view>, N>& rules) {
    for (const auto& [suffix, repl] : rules) {
      if (ends(suffix)) {
        r(repl);
        return;
      }
    }
  }

  void step2() {
    using R = std::pair<std::string_view, std::string_view>;
    switch (at(k_ - 1)) {
      case 'a':
        replace_first(std::array{R{"ational", "ate"}, R{"tional", "tion"}});
        break;
      case 'c':
        replace_first(std::array{R{"enci", "ence"}, R{"anci", "ance"}});
        break;
      case 'e':
        replace_first(std::array{R{"izer", "ize"}});
        break;
      case 'l':
        replace_first(std::array{R{"bli", "ble"}, R{"alli", "al"},
                                 R{"entli", "ent"}, R{"eli", "e"},
                                 R{"ousli", "ous"}});
        break;
      case 'o':
        replace_first(std::array{R{"ization", "ize"}, R{"ation", "ate"},
                                 R{"ator", "ate"}});
        break;
      case 's':
        replace_first(std::array{R{"alism", "al"}, R{"iveness", "ive"},
                                 R{"fulness", "ful"}, R{"ousness", "ous"}});
        break;
      case 't':
        replace_first(std::array{R{"aliti", "al"}, R{"iviti", "ive"},
                                 R{"biliti", "ble"}});
        break;
      case 'g':
        replace_first(std::array{R{"logi", "log"}});
        break;
      default:
        break;
    }
  }

  void step3() {
    using R = std::pair<std::string_view, std::string_view>;
    switch (at(k_)) {
      case 'e':
        replace_first(std::array{R{"icate", "ic"}, R{"ative", ""},
                                 R{"alize", "al"}});
        break;
      case 'i':
        replace_first(std::array{R{"iciti", "ic"}});
        break;
      case 'l':
        replace_first(std::array{R{"ical", "ic"}, R{"ful", ""}});
        break;
      case 's':
        replace_first(std::array{R{"ness", ""}});
        break;
      default:
        break;
    }
  }

  void step4() {
    bool matched = false;
    switch (at(k_ - 1)) {
      case 'a': matched = ends("al"); break;
      case 'c': matched = ends("ance") || ends("ence"); break;
      case 'e': matched = ends("er"); break;
      case 'i': matched = ends("ic"); break;
      case 'l': matched = ends("able") || ends("ible"); break;
      case 'n':
        matched = ends("ant") || ends("ement") || ends("ment") || ends("ent");
        break;
      case 'o':
        if (ends("ion") && j_ >= 0 && (at(j_) == 's' || at(j_) == 't')) {
          matched = true;
        } else {
          matched = ends("ou");
        }
        break;
      case 's': matched = ends("ism"); break;
      case 't': matched = ends("ate") || ends("iti"); break;
      case 'u': matched = ends("ous"); break;
      case 'v': matched = ends("ive"); break;
      case 'z': matched = ends("ize"); break;
      default: break;
    }
    if (matched && m() > 1) k_ = j_;
  }

  void step5() {
    j_ = k_;
    if (at(k_) == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (at(k_) == 'l' && double_c(k_) && m() > 1) --k_;
  }

  std::string b_;
  int k_ = 0;
  int j_ = 0;
};

}  // namespace

StopwordList::StopwordList() {
  for (auto w : kStopwords) words_.emplace(w);
}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
  std::unordered_set<std::string> words;
  for (auto& w : read_word_list(path)) words.insert(to_lower_ascii(w));
  return StopwordList(std::move(words));
}

const StopwordList& default_stopwords() {
  static const StopwordList list;
  return list;
}

std::vector<std::string> builtin_stopword_list() {
  return {kStopwords.begin(), kStopwords.end()};
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open word list " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  struct Unit {
    std::size_t begin, end;
    char32_t cp;
  };
  std::vector<Unit> units;
  units.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size();) {
    const std::size_t begin = i;
    const char32_t cp = next_code_point(sentence, i);
    units.push_back({begin, i, cp});
  }

  std::vector<std::string> tokens;
  std::size_t n = units.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_word_char(units[i].cp)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    std::size_t j = i + 1;
    for (;;) {
      while (j < n && is_word_char(units[j].cp)) ++j;
      if (j + 1 < n && is_joiner(units[j].cp) && is_word_char(units[j + 1].cp)) {
        j += 2;
        continue;
      }
      break;
    }
    tokens.emplace_back(sentence.substr(units[start].begin,
                                        units[j - 1].end - units[start].begin));
    i = j;
  }
  return tokens;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> normalize(std::span<const std::string> tokens,
                                   const StopwordList& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::string lower = to_lower_ascii(t);
    if (!lower.empty() && !stopwords.contains(lower)) out.push_back(std::move(lower));
  }
  return out;
}

std::string stem(std::string_view token) {
  return PorterStemmer(std::string(token)).run();
}

TermSequence preprocess(std::string_view sentence, const StopwordList& stopwords) {
  const auto tokens = tokenize(sentence);
  TermSequence seq;
  for (const auto& t : normalize(tokens, stopwords)) {
    // A stem can collide with a stopword ("ares" -> "are"), and stripping a
    // possessive "s" leaves a dangling apostrophe ("user's" -> "user'").
    std::string s = stem(t);
    while (s.ends_with('\'')) s.pop_back();
    while (s.ends_with("\xE2\x80\x99")) s.resize(s.size() - 3);
    if (!s.empty() && !stopwords.contains(s)) seq.terms.push_back(std::move(s));
  }
  return seq;
}

}  // namespace coiner::text
