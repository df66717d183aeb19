#include "coiner/ingest.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <memory>

#include <curl/curl.h>

#include "coiner/error.hpp"
#include "coiner/textproc.hpp"
#include "json.hpp"

namespace coiner::ingest {

namespace {

constexpr std::array<std::string_view, 4> kRawTextTags = {"script", "style",
                                                          "noscript", "template"};

constexpr std::array<std::string_view, 47> kBlockTags = {
    "address", "article", "aside",  "blockquote", "body",    "br",
    "caption", "dd",      "details", "div",       "dl",      "dt",
    "fieldset", "figcaption", "figure", "footer", "form",    "h1",
    "h2",      "h3",      "h4",     "h5",         "h6",      "head",
    "header",  "hr",      "html",   "li",         "main",    "nav",
    "ol",      "option",  "p",      "pre",        "section", "summary",
    "table",   "tbody",   "td",     "tfoot",      "th",      "thead",
    "title",   "tr",      "ul",     "dir",        "menu"};

bool contains(std::span<const std::string_view> set, std::string_view v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (lower(s[pos + i]) != prefix[i]) return false;
  }
  return true;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes the entity starting at s[i] == '&'. Returns the number of bytes
// consumed, or 0 when it is not a recognised entity.
std::size_t decode_entity(std::string_view s, std::size_t i, std::string& out) {
  const std::size_t semi = s.find(';', i);
  if (semi == std::string_view::npos || semi - i > 12) return 0;
  const std::string_view body = s.substr(i + 1, semi - i - 1);
  if (body.empty()) return 0;
  char32_t cp = 0;
  if (body[0] == '#') {
    std::string_view digits = body.substr(1);
    int base = 10;
    if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
      base = 16;
      digits.remove_prefix(1);
    }
    if (digits.empty()) return 0;
    for (char c : digits) {
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else return 0;
      cp = cp * static_cast<char32_t>(base) + static_cast<char32_t>(d);
      if (cp > 0x10FFFF) return 0;
    }
    if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    if (cp == 0xA0) cp = ' ';
  } else {
    static constexpr std::array<std::pair<std::string_view, char32_t>, 17> named = {{
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},
        {"quot", '"'},     {"apos", '\''},    {"nbsp", ' '},
        {"copy", 0xA9},    {"reg", 0xAE},     {"trade", 0x2122},
        {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C},
        {"rdquo", 0x201D}, {"middot", 0xB7},
    }};
    auto it = std::find_if(named.begin(), named.end(),
                           [&](const auto& e) { return e.first == body; });
    if (it == named.end()) return 0;
    cp = it->second;
  }
  append_utf8(out, cp);
  return semi - i + 1;
}

// Index just past the '>' closing the tag that opens at i, honouring quoted
// attribute values; s.size() when the tag is unterminated.
std::size_t tag_end(std::string_view s, std::size_t i) {
  char quote = 0;
  for (std::size_t j = i + 1; j < s.size(); ++j) {
    const char c = s[j];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return j + 1;
    }
  }
  return s.size();
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  std::string line;
  auto flush = [&] {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (!line.empty()) {
      if (!out.empty()) out += '\n';
      out += line;
    }
    line.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n') {
      flush();
    } else if (is_space(c)) {
      if (!line.empty() && line.back() != ' ') line += ' ';
    } else if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < s.size() &&
               static_cast<unsigned char>(s[i + 1]) == 0xA0) {
      if (!line.empty() && line.back() != ' ') line += ' ';
      ++i;
    } else {
      line += c;
    }
  }
  flush();
  return out;
}

std::string strip_once(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '<') {
      if (s.substr(i, 4) == "<!--") {
        const std::size_t close = s.find("-->", i + 4);
        i = close == std::string_view::npos ? s.size() : close + 3;
        continue;
      }
      const char next = i + 1 < s.size() ? s[i + 1] : '\0';
      if (is_alpha(next) || next == '/' || next == '!' || next == '?') {
        const bool closing = next == '/';
        std::size_t n = i + (closing ? 2 : 1);
        std::string name;
        while (n < s.size() && (is_alpha(s[n]) || (s[n] >= '0' && s[n] <= '9'))) {
          name += lower(s[n]);
          ++n;
        }
        const std::size_t end = tag_end(s, i);
        const bool self_closing = end >= 2 && end <= s.size() && s[end - 2] == '/';
        if (!closing && !self_closing && contains(kRawTextTags, name)) {
          const std::string close_tag = "</" + name;
          std::size_t j = end;
          while (j < s.size() && !starts_with_ci(s, j, close_tag)) ++j;
          i = j < s.size() ? tag_end(s, j) : s.size();
          continue;
        }
        if (contains(kBlockTags, name)) out += '\n';
        i = end;
        continue;
      }
    } else if (c == '&') {
      if (const std::size_t used = decode_entity(s, i, out)) {
        i += used;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return normalize_whitespace(out);
}

bool is_closer(std::string_view line, std::size_t i, std::size_t& width) {
  const char c = line[i];
  if (c == '"' || c == '\'' || c == ')' || c == ']') {
    width = 1;
    return true;
  }
  // U+2019 and U+201D
  if (i + 2 < line.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(line[i + 1]) == 0x80 &&
      (static_cast<unsigned char>(line[i + 2]) == 0x99 ||
       static_cast<unsigned char>(line[i + 2]) == 0x9D)) {
    width = 3;
    return true;
  }
  return false;
}

bool is_abbreviation(std::string_view word) {
  const std::string lw = text::to_lower_ascii(word);
  for (const auto& a : abbreviations()) {
    if (text::to_lower_ascii(a) == lw) return true;
  }
  return false;
}

std::string iso_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::size_t write_body(char* data, std::size_t size, std::size_t nmemb, void* user) {
  static_cast<std::string*>(user)->append(data, size * nmemb);
  return size * nmemb;
}

struct CurlDeleter {
  void operator()(CURL* c) const { curl_easy_cleanup(c); }
};

}  // namespace

std::string_view to_string(DropFlag f) {
  switch (f) {
    case DropFlag::SeeAlsoRef: return "SeeAlsoRef";
    case DropFlag::CodeMixture: return "CodeMixture";
    case DropFlag::TooShort: return "TooShort";
    case DropFlag::Copyright: return "Copyright";
  }
  return "Unknown";
}

std::vector<std::string> SentenceCandidate::flag_names() const {
  std::vector<std::string> out;
  for (auto f : {DropFlag::SeeAlsoRef, DropFlag::CodeMixture, DropFlag::TooShort,
                 DropFlag::Copyright}) {
    if (has(f)) out.emplace_back(to_string(f));
  }
  return out;
}

RawPage fetch_page(const std::string& url, const FetchOptions& options) {
  const std::string lower_url = text::to_lower_ascii(url);
  if (!(lower_url.starts_with("http://") || lower_url.starts_with("https://")) ||
      url.size() <= 8) {
    throw Error(ErrorCode::Argument, "only http(s) URLs can be fetched: " + url);
  }
  static const bool initialised = [] {
    return curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK;
  }();
  if (!initialised) throw Error(ErrorCode::Fetch, "libcurl initialisation failed");

  std::unique_ptr<CURL, CurlDeleter> curl(curl_easy_init());
  if (!curl) throw Error(ErrorCode::Fetch, "cannot create HTTP client");
  RawPage page;
  page.url = url;
  std::string body;
  char errbuf[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_MAXREDIRS, 10L);
  curl_easy_setopt(curl.get(), CURLOPT_PROTOCOLS, static_cast<long>(CURLPROTO_HTTP | CURLPROTO_HTTPS));
  curl_easy_setopt(curl.get(), CURLOPT_REDIR_PROTOCOLS,
                   static_cast<long>(CURLPROTO_HTTP | CURLPROTO_HTTPS));
  curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT_MS,
                   static_cast<long>(options.timeout.count()));
  curl_easy_setopt(curl.get(), CURLOPT_USERAGENT, options.user_agent.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, &write_body);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(curl.get(), CURLOPT_ERRORBUFFER, errbuf);
  curl_easy_setopt(curl.get(), CURLOPT_NOSIGNAL, 1L);

  const CURLcode rc = curl_easy_perform(curl.get());
  long status = 0;
  curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &status);
  page.status = status;
  if (rc != CURLE_OK) {
    throw Error(ErrorCode::Fetch, "fetch " + url + " failed (status " +
                                      std::to_string(status) + "): " +
                                      (errbuf[0] ? errbuf : curl_easy_strerror(rc)));
  }
  if (status < 200 || status >= 300) {
    throw Error(ErrorCode::Fetch,
                "fetch " + url + " returned HTTP status " + std::to_string(status));
  }
  if (body.empty()) {
    throw Error(ErrorCode::Fetch, "fetch " + url + " returned an empty body");
  }
  char* effective = nullptr;
  curl_easy_getinfo(curl.get(), CURLINFO_EFFECTIVE_URL, &effective);
  page.final_url = effective ? effective : url;
  page.fetched_at = iso_now();
  page.html = std::move(body);
  return page;
}

std::string strip_noise(std::string_view html) {
  std::string current = strip_once(html);
  for (int round = 0; round < 32; ++round) {
    std::string next = strip_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> list = {"e.g.", "i.e.", "etc.", "vs.",
                                                "Fig.", "No.",  "cf."};
  return list;
}

std::vector<SentenceCandidate> segment_sentences(std::string_view text) {
  std::vector<SentenceCandidate> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space(text[begin])) ++begin;
    while (end > begin && is_space(text[end - 1])) --end;
    if (begin == end) return;
    SentenceCandidate c;
    c.text = std::string(text.substr(begin, end - begin));
    c.position = out.size();
    c.begin = begin;
    c.end = end;
    out.push_back(std::move(c));
  };

  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);

    std::size_t sent_start = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (c != '.' && c != '!' && c != '?') {
        ++i;
        continue;
      }
      std::size_t q = i;
      while (q + 1 < line.size() &&
             (line[q + 1] == '.' || line[q + 1] == '!' || line[q + 1] == '?')) {
        ++q;
      }
      std::size_t after = q + 1;
      std::size_t width = 0;
      while (after < line.size() && is_closer(line, after, width)) after += width;

      bool boundary = false;
      std::size_t r = after;
      while (r < line.size() && is_space(line[r])) ++r;
      if (r == line.size()) {
        boundary = true;
      } else if (r > after && line[r] >= 'A' && line[r] <= 'Z') {
        boundary = true;
      }
      if (boundary && c == '.' && q == i) {
        std::size_t w = i;
        while (w > sent_start && !is_space(line[w - 1])) --w;
        while (w < i && !is_alpha(line[w])) ++w;
        if (is_abbreviation(line.substr(w, i + 1 - w))) boundary = false;
      }
      if (boundary) {
        emit(line_start + sent_start, line_start + after);
        sent_start = after;
      }
      i = after;
    }
    emit(line_start + sent_start, line_end);
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  return out;
}

double non_alpha_ratio(std::string_view s) {
  std::size_t total = 0;
  std::size_t letters = 0;
  for (std::size_t i = 0; i < s.size();) {
    const char32_t cp = text::next_code_point(s, i);
    ++total;
    if (text::is_word_char(cp) && !(cp >= '0' && cp <= '9')) ++letters;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(total - letters) / static_cast<double>(total);
}

std::uint8_t classify_noise(std::string_view sentence, const FilterConfig& config) {
  std::uint8_t flags = 0;
  const std::string lower_text = text::to_lower_ascii(sentence);
  if (lower_text.find("see also") != std::string::npos) {
    flags |= static_cast<std::uint8_t>(DropFlag::SeeAlsoRef);
  }
  if (sentence.find("```") != std::string_view::npos ||
      non_alpha_ratio(sentence) >= config.code_ratio) {
    flags |= static_cast<std::uint8_t>(DropFlag::CodeMixture);
  }
  if (text::tokenize(sentence).size() < config.min_tokens) {
    flags |= static_cast<std::uint8_t>(DropFlag::TooShort);
  }
  if (lower_text.find("copyright") != std::string::npos ||
      lower_text.find("all rights reserved") != std::string::npos ||
      sentence.find("\xC2\xA9") != std::string_view::npos) {
    flags |= static_cast<std::uint8_t>(DropFlag::Copyright);
  }
  return flags;
}

FilterResult heuristic_filter(std::vector<SentenceCandidate> candidates,
                              const FilterConfig& config) {
  FilterResult result;
  for (auto& c : candidates) {
    c.flags = config.enabled ? classify_noise(c.text, config) : 0;
    (c.flags == 0 ? result.kept : result.dropped).push_back(std::move(c));
  }
  return result;
}

namespace {

bool is_url(const std::string& s) {
  const auto colon = s.find("://");
  return colon != std::string::npos && colon > 0 &&
         std::all_of(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(colon),
                     [](char c) { return is_alpha(c) || c == '+' || c == '-' || c == '.'; });
}

std::string url_host(const std::string& url) {
  auto start = url.find("://") + 3;
  auto stop = url.find_first_of("/:?#", start);
  return url.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
}

}  // namespace

IngestResult ingest_source(const std::string& source, std::string api, const FilterConfig& filter,
                           const FetchOptions& fetch) {
  IngestResult r;
  r.source = source;
  std::string text;
  if (is_url(source)) {
    auto page = fetch_page(source, fetch);
    r.retrieved = page.fetched_at.substr(0, 10);
    text = strip_noise(page.html);
    if (api.empty()) api = url_host(page.final_url.empty() ? source : page.final_url);
  } else {
    const std::filesystem::path path(source);
    std::ifstream in(path, std::ios::binary);
    if (!in || std::filesystem::is_directory(path)) {
      throw Error(ErrorCode::Io, "cannot read " + source);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto ext = text::to_lower_ascii(path.extension().string());
    text = ext == ".txt" ? ss.str() : strip_noise(ss.str());
    if (api.empty()) api = path.stem().string();
  }
  r.api = api;
  auto filtered = heuristic_filter(segment_sentences(text), filter);
  r.kept = std::move(filtered.kept);
  r.dropped = std::move(filtered.dropped);
  return r;
}

std::string format_skeleton(const IngestResult& r) {
  std::string out;
  for (const auto& c : r.kept) {
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", c.position + 1);
    nlohmann::ordered_json j;
    j["id"] = r.api + "-" + id;
    j["api"] = r.api;
    j["text"] = c.text;
    j["label7"] = "";
    if (r.retrieved) j["retrieved"] = *r.retrieved;
    j["position"] = c.position;
    out += j.dump() + "\n";
  }
  return out;
}

std::string format_drop_log(const IngestResult& r) {
  std::string out;
  for (const auto& c : r.dropped) {
    nlohmann::ordered_json j;
    j["position"] = c.position;
    j["text"] = c.text;
    j["flags"] = c.flag_names();
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace coiner::ingest
