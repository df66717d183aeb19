#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coiner::ingest {

struct RawPage {
  std::string url;
  std::string final_url;
  std::string fetched_at;  // ISO-8601 UTC
  long status = 0;
  std::string html;
};

struct FetchOptions {
  std::chrono::milliseconds timeout{15000};
  std::string user_agent = "coiner/1.0";
};

// http(s) only; anything else is an Argument error. Network failures,
// timeouts and non-2xx responses raise Error(Fetch) carrying the status.
RawPage fetch_page(const std::string& url, const FetchOptions& options = {});

// Markup-free text: script/style/noscript/template contents and comments are
// dropped, block-level elements become line breaks, entities are decoded,
// whitespace is collapsed per line and empty lines removed. Runs to a fixpoint
// so the result is stable under re-application.
std::string strip_noise(std::string_view html);

enum class DropFlag : std::uint8_t {
  SeeAlsoRef = 1 << 0,
  CodeMixture = 1 << 1,
  TooShort = 1 << 2,
  Copyright = 1 << 3,
};

std::string_view to_string(DropFlag f);

struct SentenceCandidate {
  std::string text;
  std::size_t position = 0;
  // Byte range of the trimmed sentence within the segmented text.
  std::size_t begin = 0;
  std::size_t end = 0;
  std::uint8_t flags = 0;

  bool has(DropFlag f) const { return (flags & static_cast<std::uint8_t>(f)) != 0; }
  std::vector<std::string> flag_names() const;
};

// Line breaks are hard boundaries. Within a line a sentence ends after a run of
// '.', '!' or '?' (plus closing quotes/brackets) that is followed by whitespace
// and an uppercase letter, or by end of line, unless the word ending in '.' is
// a protected abbreviation.
std::vector<SentenceCandidate> segment_sentences(std::string_view text);

const std::vector<std::string>& abbreviations();

struct FilterConfig {
  double code_ratio = 0.30;
  std::size_t min_tokens = 3;
  // When false every candidate is kept unflagged.
  bool enabled = true;
};

struct FilterResult {
  std::vector<SentenceCandidate> kept;
  std::vector<SentenceCandidate> dropped;
};

// Ratio of non-letter code points (whitespace included) to all code points.
double non_alpha_ratio(std::string_view text);

std::uint8_t classify_noise(std::string_view text, const FilterConfig& config = {});

FilterResult heuristic_filter(std::vector<SentenceCandidate> candidates,
                              const FilterConfig& config = {});

struct IngestResult {
  std::string source;
  std::string api;
  // Fetch date (YYYY-MM-DD) for URLs; absent for local files.
  std::optional<std::string> retrieved;
  std::vector<SentenceCandidate> kept;
  std::vector<SentenceCandidate> dropped;

  std::size_t total() const { return kept.size() + dropped.size(); }
};

// Reads a local .html/.htm/.txt file or fetches an http(s) URL, strips markup
// (anything not ending in .txt is treated as HTML), segments and filters.
// api defaults to the file stem or URL host. Unreadable files raise Error(Io).
IngestResult ingest_source(const std::string& source, std::string api = {},
                           const FilterConfig& filter = {}, const FetchOptions& fetch = {});

// Annotation skeleton: one JSONL record per kept sentence with an empty
// label7 field.
std::string format_skeleton(const IngestResult& r);
// One JSONL record per dropped candidate with its flags.
std::string format_drop_log(const IngestResult& r);

}  // namespace coiner::ingest
