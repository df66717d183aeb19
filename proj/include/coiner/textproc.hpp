#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace coiner::text {

// Processed tokens: nonempty, lowercase, stemmed, no stopwords.
struct TermSequence {
  std::vector<std::string> terms;

  bool operator==(const TermSequence&) const = default;
};

class StopwordList {
 public:
  // The built-in English list.
  StopwordList();
  explicit StopwordList(std::unordered_set<std::string> words)
      : words_(std::move(words)) {}

  // One lowercase word per line; blank lines and '#' comments are skipped.
  static StopwordList from_file(const std::filesystem::path& path);

  bool contains(std::string_view word) const {
    return words_.contains(std::string(word));
  }
  std::size_t size() const { return words_.size(); }
  const std::unordered_set<std::string>& words() const { return words_; }

 private:
  std::unordered_set<std::string> words_;
};

const StopwordList& default_stopwords();
std::vector<std::string> builtin_stopword_list();

// Decodes one UTF-8 code point at s[i] and advances i; invalid bytes decode
// as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i);

// Letters and digits. Non-ASCII code points outside the punctuation and symbol
// blocks count as letters.
bool is_word_char(char32_t cp);

// Maximal runs of letters/digits; internal hyphens and apostrophes (ASCII or
// U+2019) join runs, other punctuation separates them.
std::vector<std::string> tokenize(std::string_view sentence);

std::string to_lower_ascii(std::string_view s);

// Lowercases and drops stopwords, preserving order.
std::vector<std::string> normalize(std::span<const std::string> tokens,
                                   const StopwordList& stopwords = default_stopwords());

// Porter stemmer (the widely distributed reference version, including its
// "bli" -> "ble" and "logi" -> "log" departures from the 1980 rule set).
std::string stem(std::string_view token);

TermSequence preprocess(std::string_view sentence,
                        const StopwordList& stopwords = default_stopwords());

std::vector<std::string> read_word_list(const std::filesystem::path& path);

}  // namespace coiner::text
