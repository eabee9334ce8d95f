#pragma once

// Citation numbering and the fixed numeric rendering: in-text anchors, the
// bibliography list and the embedded machine-readable metadata block.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kblog/error.hpp"
#include "kblog/http.hpp"
#include "kblog/identifiers.hpp"
#include "kblog/record.hpp"
#include "kblog/scanner.hpp"
#include "kblog/text.hpp"

namespace kblog {

enum class CitationStatus { pending, resolved, unresolved, invalid };

struct CitationInstance {
  Span span;
  std::string raw;                        // body as written
  std::optional<Identifier> identifier;   // absent when classification failed
  int occurrence = 0;                     // 0-based among instances of the same identifier
  CitationStatus status = CitationStatus::pending;
  std::optional<BibliographicRecord> record;
  std::string error;
  std::optional<std::string> cito;        // typed-citation attribute, carried into the JSON only

  bool classified() const { return identifier.has_value(); }
};

/// Canonical identifier key -> 1-based number in first-appearance order.
struct NumberingMap {
  std::map<std::string, int> numbers;
  std::vector<std::string> order;  // order[n - 1] is the key numbered n

  std::size_t size() const { return order.size(); }
  bool empty() const { return order.empty(); }
  std::optional<int> number(const std::string& key) const {
    auto it = numbers.find(key);
    if (it == numbers.end()) return std::nullopt;
    return it->second;
  }
  bool operator==(const NumberingMap&) const = default;
};

/// Classifies each `[cite]` token, honouring its `source` attribute.
/// Classification failures become `invalid` instances rather than being dropped.
inline std::vector<CitationInstance> collect_citations(const std::vector<ShortcodeToken>& tokens,
                                                       bool strict_sources = false) {
  std::vector<CitationInstance> out;
  std::map<std::string, int> seen;
  for (const auto& token : tokens) {
    if (token.name != "cite") continue;
    CitationInstance c;
    c.span = token.span;
    c.raw = token.body.value_or("");
    c.cito = token.attribute("cito");
    try {
      auto source = token.attribute("source");
      c.identifier = classify(c.raw, source ? std::optional<std::string_view>(*source) : std::nullopt,
                              strict_sources);
      c.occurrence = seen[c.identifier->key()]++;
    } catch (const Error& e) {
      c.status = CitationStatus::invalid;
      c.error = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline NumberingMap assign_numbers(const std::vector<CitationInstance>& instances) {
  NumberingMap map;
  for (const auto& c : instances) {
    if (!c.classified()) continue;
    auto key = c.identifier->key();
    if (map.numbers.contains(key)) continue;
    map.order.push_back(key);
    map.numbers.emplace(std::move(key), static_cast<int>(map.order.size()));
  }
  return map;
}

inline std::string format_intext(const CitationInstance& c, const NumberingMap& map) {
  if (!c.classified())
    return "<span class=\"kcite-error\" title=\"" + text::escape_attr(c.error) + "\">[cite?]</span>";
  const std::string n = std::to_string(map.number(c.identifier->key()).value_or(0));
  if (c.status == CitationStatus::resolved && c.record) {
    return "<a class=\"kcite\" id=\"kcite-ref-" + n + "-" + std::to_string(c.occurrence) + "\" href=\"#kcite-bib-" +
           n + "\" title=\"" + text::escape_attr(c.record->title) + "\">[" + n + "]</a>";
  }
  return "<a class=\"kcite kcite-unresolved\" href=\"" + text::escape_attr(external_url(*c.identifier)) + "\">[" +
         n + "]</a>";
}

namespace detail {

// "John Ronald" -> "JR"; tokens already in capitals ("GI", "J.R.") are kept.
inline std::string initials(std::string_view given) {
  std::string out;
  for (const auto& token : text::split_ws(given)) {
    std::string letters;
    bool all_caps = true;
    for (char c : token) {
      if (c == '.') continue;
      letters.push_back(c);
      if (!(c >= 'A' && c <= 'Z')) all_caps = false;
    }
    if (letters.empty()) continue;
    if (all_caps && letters.size() <= 4) {
      out += letters;
      continue;
    }
    // first letter of each hyphenated part
    bool at_start = true;
    for (std::size_t i = 0; i < letters.size();) {
      auto len = text::utf8_length(static_cast<unsigned char>(letters[i]));
      if (letters[i] == '-') {
        at_start = true;
      } else if (at_start) {
        std::string ch = letters.substr(i, len);
        if (len == 1) ch[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(ch[0])));
        out += ch;
        at_start = false;
      }
      i += len;
    }
  }
  return out;
}

inline std::string format_author(const Author& a) {
  if (!a.literal.empty()) return a.literal;
  auto gi = initials(a.given);
  return gi.empty() ? a.family : a.family + " " + gi;
}

inline std::string link_host(std::string_view url) {
  auto parsed = parse_url(url);
  return parsed ? parsed->host : std::string(url);
}

inline bool ends_sentence(std::string_view s) {
  return !s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!');
}

}  // namespace detail

inline constexpr std::size_t kMaxListedAuthors = 10;

/// One `<li>` in the fixed numeric style. Missing fields drop out together
/// with their punctuation.
inline std::string format_entry(const BibliographicRecord& r, int n) {
  std::string out = "<li id=\"kcite-bib-" + std::to_string(n) + "\">";

  std::string authors;
  for (std::size_t i = 0; i < r.authors.size() && i < kMaxListedAuthors; ++i)
    authors += (i ? ", " : "") + text::escape_html(detail::format_author(r.authors[i]));
  if (r.authors.size() > kMaxListedAuthors) authors += " et al.";
  std::string head = authors;
  if (r.issued) head += (head.empty() ? "(" : " (") + std::to_string(r.issued->year) + ")";
  if (!head.empty()) out += head + (detail::ends_sentence(head) ? " " : ". ");

  std::string title = text::escape_html(r.title);
  out += title + (detail::ends_sentence(title) ? " " : ". ");

  std::string locator;
  if (r.volume) locator += text::escape_html(*r.volume);
  if (r.issue) locator += "(" + text::escape_html(*r.issue) + ")";
  if (r.pages) locator += (locator.empty() ? "" : ":") + text::escape_html(*r.pages);
  std::string source;
  if (r.container_title) source = "<i>" + text::escape_html(*r.container_title) + "</i>";
  if (!locator.empty()) source += (source.empty() ? "" : " ") + locator;
  if (!source.empty()) out += source + ". ";

  std::string href = r.doi ? "https://doi.org/" + *r.doi : r.url;
  std::string label = r.doi ? "doi:" + *r.doi : detail::link_host(r.url);
  out += "<a href=\"" + text::escape_attr(href) + "\">" + text::escape_html(label) + "</a>.</li>";
  return out;
}

/// Placeholder entry for a classified citation whose metadata could not be fetched.
inline std::string format_unresolved_entry(const Identifier& id, int n) {
  std::string url = external_url(id);
  std::string label = id.is_doi() ? "doi:" + id.value : url;
  return "<li id=\"kcite-bib-" + std::to_string(n) + "\" class=\"kcite-unresolved\">Metadata unavailable. <a href=\"" +
         text::escape_attr(url) + "\">" + text::escape_html(label) + "</a>.</li>";
}

namespace detail {

// First instance per number, i.e. the one that carries the identifier and
// (once resolution has run) the record.
inline std::vector<const CitationInstance*> representatives(const NumberingMap& map,
                                                            const std::vector<CitationInstance>& instances) {
  std::vector<const CitationInstance*> reps(map.size(), nullptr);
  for (const auto& c : instances) {
    if (!c.classified()) continue;
    auto n = map.number(c.identifier->key());
    if (!n) continue;
    auto& slot = reps[static_cast<std::size_t>(*n - 1)];
    if (!slot || (!slot->record && c.record)) slot = &c;
  }
  return reps;
}

}  // namespace detail

inline std::string build_bibliography(const NumberingMap& map, const std::vector<CitationInstance>& instances) {
  if (map.empty()) return {};
  std::string out = "<ol class=\"kcite-bibliography\">\n";
  auto reps = detail::representatives(map, instances);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    int n = static_cast<int>(i + 1);
    const CitationInstance* c = reps[i];
    if (c && c->record) out += format_entry(*c->record, n);
    else if (c) out += format_unresolved_entry(*c->identifier, n);
    out += "\n";
  }
  out += "</ol>";
  return out;
}

/// JSON payload of the metadata block: resolved records in number order, each
/// with its citation number and any `cito` annotations.
inline nlohmann::json metadata_json(const NumberingMap& map, const std::vector<CitationInstance>& instances) {
  nlohmann::json doc{{"version", 1}, {"references", nlohmann::json::array()}};
  auto reps = detail::representatives(map, instances);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const CitationInstance* c = reps[i];
    if (!c || !c->record) continue;
    nlohmann::json entry = to_json(*c->record);
    entry["number"] = static_cast<int>(i + 1);
    std::vector<std::string> cito;
    for (const auto& other : instances) {
      if (!other.classified() || other.identifier->key() != c->identifier->key() || !other.cito) continue;
      if (std::find(cito.begin(), cito.end(), *other.cito) == cito.end()) cito.push_back(*other.cito);
    }
    if (!cito.empty()) entry["cito"] = cito;
    doc["references"].push_back(std::move(entry));
  }
  return doc;
}

inline std::string embed_metadata_json(const NumberingMap& map, const std::vector<CitationInstance>& instances) {
  std::string payload = metadata_json(map, instances).dump();
  // "</" would close the script element early; "<\/" is the same JSON string.
  std::string safe;
  safe.reserve(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    safe.push_back(payload[i]);
    if (payload[i] == '<' && i + 1 < payload.size() && payload[i + 1] == '/') safe.push_back('\\');
  }
  return "<script type=\"application/json\" id=\"kcite-metadata\">" + safe + "</script>";
}

/// Records recovered from an embedded metadata block.
inline std::vector<BibliographicRecord> parse_embedded_metadata(std::string_view html) {
  static constexpr std::string_view open = "<script type=\"application/json\" id=\"kcite-metadata\">";
  auto start = html.find(open);
  if (start == std::string_view::npos) throw Error(ErrorCode::MalformedMetadata, "no kcite-metadata block");
  start += open.size();
  auto end = html.find("</script>", start);
  if (end == std::string_view::npos) throw Error(ErrorCode::MalformedMetadata, "unterminated kcite-metadata block");
  auto j = nlohmann::json::parse(html.substr(start, end - start), nullptr, false);
  if (j.is_discarded() || !j.contains("references"))
    throw Error(ErrorCode::MalformedMetadata, "kcite-metadata is not valid JSON");
  std::vector<BibliographicRecord> out;
  for (const auto& r : j.at("references")) out.push_back(record_from_json(r));
  return out;
}

}  // namespace kblog
