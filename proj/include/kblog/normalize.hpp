#pragma once

// One normalizer per provider wire format. Each maps a RawResponse onto the
// homogeneous BibliographicRecord and records lossy decisions as notes.

#include <array>
#include <charconv>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "kblog/error.hpp"
#include "kblog/http.hpp"
#include "kblog/identifiers.hpp"
#include "kblog/record.hpp"
#include "kblog/scanner.hpp"
#include "kblog/text.hpp"

namespace kblog {

using Notes = std::vector<std::string>;

inline constexpr std::string_view kUntitled = "[untitled]";
inline constexpr std::string_view kNoAuthor = "[no author]";

namespace detail {

inline void note(Notes* notes, std::string message) {
  if (notes) notes->push_back(std::move(message));
}

inline std::optional<int> to_int(std::string_view s) {
  s = text::trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> json_int(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) return to_int(v.get<std::string>());
  return std::nullopt;
}

// Strings, numbers and single-element arrays all occur for the same CSL field.
inline std::optional<std::string> json_text(const nlohmann::json& obj, const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  const auto* v = &obj.at(key);
  if (v->is_array()) {
    if (v->empty()) return std::nullopt;
    v = &v->front();
  }
  std::string s;
  if (v->is_string()) s = v->get<std::string>();
  else if (v->is_number_integer()) s = std::to_string(v->get<long long>());
  else return std::nullopt;
  s = text::collapse_whitespace(s);
  if (s.empty()) return std::nullopt;
  return s;
}

inline std::optional<int> month_from_name(std::string_view s) {
  static constexpr std::array<std::string_view, 12> names{"jan", "feb", "mar", "apr", "may", "jun",
                                                          "jul", "aug", "sep", "oct", "nov", "dec"};
  if (s.size() < 3) return std::nullopt;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (text::istarts_with(s, names[i])) return static_cast<int>(i + 1);
  return std::nullopt;
}

// `YYYY`, `YYYY-MM`, `YYYY-MM-DD`, optionally followed by a time (`T...`).
inline std::optional<IssuedDate> parse_iso_date(std::string_view s) {
  s = text::trim(s);
  if (s.size() < 4) return std::nullopt;
  auto year = to_int(s.substr(0, 4));
  if (!year) return std::nullopt;
  std::optional<int> month, day;
  if (s.size() >= 7 && (s[4] == '-' || s[4] == '/')) {
    month = to_int(s.substr(5, 2));
    if (s.size() >= 10 && s[7] == s[4]) day = to_int(s.substr(8, 2));
  }
  return make_date(*year, month, day);
}

// "Family GI": the last token is initials.
inline Author split_initials_name(std::string_view name, Notes* notes) {
  auto parts = text::split_ws(name);
  if (parts.size() < 2) {
    note(notes, "single-token author name '" + std::string(name) + "' kept as literal");
    return Author{{}, {}, text::collapse_whitespace(name)};
  }
  std::string family;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) family += (i ? " " : "") + parts[i];
  return Author{family, parts.back(), {}};
}

// "Given Middle Family": the last token is the family name.
inline Author split_display_name(std::string_view name, Notes* notes) {
  auto parts = text::split_ws(name);
  if (parts.size() < 2) {
    note(notes, "single-token author name '" + std::string(name) + "' kept as literal");
    return Author{{}, {}, text::collapse_whitespace(name)};
  }
  std::string given;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) given += (i ? " " : "") + parts[i];
  return Author{parts.back(), given, {}};
}

inline std::string media_essence(std::string_view media_type) {
  return text::to_lower(text::trim(media_type.substr(0, media_type.find(';'))));
}

}  // namespace detail

/// CSL-JSON (doi.org content negotiation, both Crossref and DataCite).
inline BibliographicRecord normalize_csl(const RawResponse& raw, const Identifier& id, Notes* notes = nullptr) {
  auto j = nlohmann::json::parse(raw.bytes, nullptr, false);
  if (j.is_array() && j.size() == 1) j = j.front();
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": CSL payload is not a JSON object");

  BibliographicRecord r;
  r.id = id.key();
  r.url = external_url(id);
  r.provider = id.kind == IdentifierKind::doi_datacite ? Provider::datacite : Provider::crossref;

  auto title = detail::json_text(j, "title");
  if (j.contains("author") && j.at("author").is_array()) {
    for (const auto& a : j.at("author")) {
      if (!a.is_object()) continue;
      Author author;
      if (auto lit = detail::json_text(a, "literal")) author.literal = *lit;
      else if (auto fam = detail::json_text(a, "family")) {
        author.family = *fam;
        author.given = detail::json_text(a, "given").value_or("");
      } else if (auto name = detail::json_text(a, "name")) author.literal = *name;
      else continue;
      r.authors.push_back(std::move(author));
    }
  }
  if (!title && r.authors.empty())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": CSL record has neither title nor author");
  if (title) {
    r.title = *title;
  } else {
    r.title = kUntitled;
    detail::note(notes, id.key() + ": CSL record has no title");
  }

  std::string type = j.value("type", std::string());
  if (type == "journal-article" || type == "article-journal") r.entry_type = EntryType::article_journal;
  else if (type == "dataset") r.entry_type = EntryType::dataset;
  else r.entry_type = EntryType::other;

  r.container_title = detail::json_text(j, "container-title");
  r.volume = detail::json_text(j, "volume");
  r.issue = detail::json_text(j, "issue");
  r.pages = detail::json_text(j, "page");
  r.publisher = detail::json_text(j, "publisher");

  if (j.contains("issued") && j.at("issued").is_object()) {
    const auto& issued = j.at("issued");
    if (issued.contains("date-parts") && issued.at("date-parts").is_array() && !issued.at("date-parts").empty() &&
        issued.at("date-parts").front().is_array()) {
      const auto& parts = issued.at("date-parts").front();
      std::optional<int> year = parts.size() > 0 ? detail::json_int(parts[0]) : std::nullopt;
      std::optional<int> month = parts.size() > 1 ? detail::json_int(parts[1]) : std::nullopt;
      std::optional<int> day = parts.size() > 2 ? detail::json_int(parts[2]) : std::nullopt;
      if (year) r.issued = make_date(*year, month, day);
      if (!r.issued) detail::note(notes, id.key() + ": unusable issued date");
    }
  }

  if (auto doi = detail::json_text(j, "DOI")) {
    try {
      r.doi = canonical_doi(*doi);
    } catch (const Error&) {
      detail::note(notes, id.key() + ": ignoring malformed DOI '" + *doi + "'");
    }
  }
  if (!r.doi && id.is_doi()) r.doi = id.value;
  return r;
}

/// NCBI esummary JSON (db=pubmed).
inline BibliographicRecord normalize_pubmed(const RawResponse& raw, const Identifier& id, Notes* notes = nullptr) {
  auto j = nlohmann::json::parse(raw.bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": esummary payload is not a JSON object");
  if (j.contains("error")) throw Error(ErrorCode::NotFound, id.key() + ": " + j.at("error").dump());
  if (!j.contains("result") || !j.at("result").is_object())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": esummary payload has no result");
  const auto& result = j.at("result");
  if (!result.contains(id.value)) throw Error(ErrorCode::NotFound, id.key() + ": not in esummary result");
  const auto& doc = result.at(id.value);
  if (!doc.is_object() || doc.contains("error"))
    throw Error(ErrorCode::NotFound,
                id.key() + ": " + (doc.is_object() ? doc.at("error").dump() : std::string("bad document summary")));

  BibliographicRecord r;
  r.id = id.key();
  r.url = external_url(id);
  r.provider = Provider::pubmed;
  r.entry_type = EntryType::article_journal;

  if (doc.contains("authors") && doc.at("authors").is_array()) {
    for (const auto& a : doc.at("authors")) {
      auto name = detail::json_text(a, "name");
      if (!name) continue;
      if (a.value("authtype", std::string()) == "CollectiveName") r.authors.push_back(Author{{}, {}, *name});
      else r.authors.push_back(detail::split_initials_name(*name, notes));
    }
  }
  auto title = detail::json_text(doc, "title");
  if (title && title->size() > 1 && title->back() == '.') title->pop_back();
  if (!title && r.authors.empty())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": summary has neither title nor author");
  r.title = title.value_or(std::string(kUntitled));
  if (!title) detail::note(notes, id.key() + ": summary has no title");

  r.container_title = detail::json_text(doc, "source");
  r.volume = detail::json_text(doc, "volume");
  r.issue = detail::json_text(doc, "issue");
  r.pages = detail::json_text(doc, "pages");

  if (auto pubdate = detail::json_text(doc, "pubdate")) {
    auto parts = text::split_ws(*pubdate);
    std::optional<int> year = parts.empty() ? std::nullopt : detail::to_int(parts[0]);
    std::optional<int> month = parts.size() > 1 ? detail::month_from_name(parts[1]) : std::nullopt;
    std::optional<int> day = parts.size() > 2 ? detail::to_int(parts[2]) : std::nullopt;
    if (year) r.issued = make_date(*year, month, day);
    if (!r.issued) detail::note(notes, id.key() + ": unparseable pubdate '" + *pubdate + "'");
  }

  if (doc.contains("articleids") && doc.at("articleids").is_array()) {
    for (const auto& aid : doc.at("articleids")) {
      if (aid.value("idtype", std::string()) != "doi") continue;
      try {
        r.doi = canonical_doi(aid.value("value", std::string()));
      } catch (const Error&) {
        detail::note(notes, id.key() + ": ignoring malformed DOI in articleids");
      }
      break;
    }
  }
  return r;
}

/// arXiv API Atom feed.
inline BibliographicRecord normalize_arxiv(const RawResponse& raw, const Identifier& id, Notes* notes = nullptr) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(raw.bytes);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": Atom feed does not parse: " + e.message());
  }
  auto feed = tree.get_child_optional("feed");
  if (!feed) throw Error(ErrorCode::MalformedMetadata, id.key() + ": no <feed> element");
  auto entry_it = feed->find("entry");
  if (entry_it == feed->not_found()) throw Error(ErrorCode::NotFound, id.key() + ": empty arXiv feed");
  const pt::ptree& entry = entry_it->second;

  auto field = [&](const char* key) { return text::collapse_whitespace(entry.get<std::string>(key, "")); };
  std::string entry_id = field("id");
  std::string title = field("title");
  if (entry_id.find("api/errors") != std::string::npos)
    throw Error(ErrorCode::NotFound, id.key() + ": arXiv reports " + field("summary"));

  BibliographicRecord r;
  r.id = id.key();
  r.url = external_url(id);
  r.provider = Provider::arxiv;
  r.entry_type = EntryType::preprint;
  r.container_title = "arXiv";
  for (const auto& [name, child] : entry) {
    if (name != "author") continue;
    std::string author = text::collapse_whitespace(child.get<std::string>("name", ""));
    if (!author.empty()) r.authors.push_back(detail::split_display_name(author, notes));
  }
  if (title.empty() && r.authors.empty())
    throw Error(ErrorCode::MalformedMetadata, id.key() + ": arXiv entry has neither title nor author");
  r.title = title.empty() ? std::string(kUntitled) : title;
  if (title.empty()) detail::note(notes, id.key() + ": arXiv entry has no title");

  if (auto published = field("published"); !published.empty()) {
    r.issued = detail::parse_iso_date(published);
    if (!r.issued) detail::note(notes, id.key() + ": unparseable published date '" + published + "'");
  }
  if (auto doi = field("arxiv:doi"); !doi.empty()) {
    try {
      r.doi = canonical_doi(doi);
    } catch (const Error&) {
      detail::note(notes, id.key() + ": ignoring malformed DOI '" + doi + "'");
    }
  }
  return r;
}

namespace detail {

// Attributes of a start tag, names lowercased. `tag` spans `<name ... >`.
inline std::vector<std::pair<std::string, std::string>> tag_attributes(std::string_view tag) {
  std::vector<std::pair<std::string, std::string>> attrs;
  std::size_t i = tag.find_first_of(" \t\r\n");
  if (i == std::string_view::npos) return attrs;
  while (i < tag.size()) {
    while (i < tag.size() && (text::is_space(tag[i]) || tag[i] == '/')) ++i;
    if (i >= tag.size() || tag[i] == '>') break;
    std::size_t ks = i;
    while (i < tag.size() && !text::is_space(tag[i]) && tag[i] != '=' && tag[i] != '>' && tag[i] != '/') ++i;
    std::string key = text::to_lower(tag.substr(ks, i - ks));
    while (i < tag.size() && text::is_space(tag[i])) ++i;
    std::string value;
    if (i < tag.size() && tag[i] == '=') {
      ++i;
      while (i < tag.size() && text::is_space(tag[i])) ++i;
      if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) {
        char q = tag[i++];
        std::size_t end = tag.find(q, i);
        if (end == std::string_view::npos) end = tag.size();
        value = std::string(tag.substr(i, end - i));
        i = end + 1;
      } else {
        std::size_t vs = i;
        while (i < tag.size() && !text::is_space(tag[i]) && tag[i] != '>') ++i;
        value = std::string(tag.substr(vs, i - vs));
      }
    }
    if (!key.empty()) attrs.emplace_back(std::move(key), text::decode_entities(value));
  }
  return attrs;
}

inline std::string attr_or_empty(const std::vector<std::pair<std::string, std::string>>& attrs, std::string_view k) {
  for (const auto& [key, v] : attrs)
    if (key == k) return v;
  return {};
}

struct PageFacts {
  std::optional<std::string> title_element;
  std::vector<std::pair<std::string, std::string>> metas;  // lowercased name/property -> content
  std::optional<std::string> canonical;
};

inline PageFacts scan_page(std::string_view html) {
  PageFacts facts;
  std::size_t i = 0;
  while ((i = html.find('<', i)) != std::string_view::npos) {
    if (html.substr(i, 4) == "<!--") {
      auto end = html.find("-->", i + 4);
      if (end == std::string_view::npos) break;
      i = end + 3;
      continue;
    }
    auto gt = html.find('>', i);
    if (gt == std::string_view::npos) break;
    std::string_view tag = html.substr(i, gt - i + 1);
    if (!facts.title_element && opens_element(html, i, "title")) {
      auto close = text::ifind(html, "</title", gt);
      if (close != std::string_view::npos) {
        auto t = text::collapse_whitespace(text::decode_entities(html.substr(gt + 1, close - gt - 1)));
        if (!t.empty()) facts.title_element = t;
        i = close;
        continue;
      }
    } else if (opens_element(html, i, "meta")) {
      auto attrs = tag_attributes(tag);
      std::string name = attr_or_empty(attrs, "name");
      if (name.empty()) name = attr_or_empty(attrs, "property");
      if (!name.empty()) facts.metas.emplace_back(text::to_lower(name), attr_or_empty(attrs, "content"));
    } else if (opens_element(html, i, "link")) {
      auto attrs = tag_attributes(tag);
      if (text::iequals(attr_or_empty(attrs, "rel"), "canonical")) {
        auto href = attr_or_empty(attrs, "href");
        if (parse_url(href)) facts.canonical = href;
      }
    }
    i = gt + 1;
  }
  return facts;
}

inline std::optional<std::string> first_meta(const PageFacts& facts, std::string_view name) {
  for (const auto& [k, v] : facts.metas) {
    if (k != name) continue;
    auto t = text::collapse_whitespace(v);
    if (!t.empty()) return t;
  }
  return std::nullopt;
}

}  // namespace detail

/// HTML landing page: `<title>`, then `citation_title`, then `DC.title`.
inline BibliographicRecord normalize_webpage(const RawResponse& raw, const Identifier& id, Notes* notes = nullptr) {
  if (detail::media_essence(raw.media_type) != "text/html")
    throw Error(ErrorCode::MalformedMetadata,
                id.key() + ": expected text/html, got '" + raw.media_type + "'");
  auto facts = detail::scan_page(raw.bytes);

  BibliographicRecord r;
  r.id = id.key();
  r.url = facts.canonical.value_or(external_url(id));
  r.provider = Provider::webpage;
  r.entry_type = EntryType::webpage;

  std::optional<std::string> title = facts.title_element;
  if (!title) title = detail::first_meta(facts, "citation_title");
  if (!title) title = detail::first_meta(facts, "dc.title");
  if (title) {
    r.title = *title;
  } else {
    r.title = kUntitled;
    detail::note(notes, id.key() + ": page has no title");
  }

  for (const auto& [k, v] : facts.metas) {
    if (k != "citation_author" && k != "dc.creator") continue;
    auto name = text::collapse_whitespace(v);
    if (!name.empty()) r.authors.push_back(Author{{}, {}, name});
  }
  if (r.authors.empty()) r.authors.push_back(Author{{}, {}, std::string(kNoAuthor)});

  for (std::string_view key : {"citation_publication_date", "citation_date", "dc.date"}) {
    if (auto d = detail::first_meta(facts, key)) {
      r.issued = detail::parse_iso_date(*d);
      if (r.issued) break;
    }
  }
  r.container_title = detail::first_meta(facts, "citation_journal_title");
  if (auto doi = detail::first_meta(facts, "citation_doi")) {
    try {
      r.doi = canonical_doi(*doi);
    } catch (const Error&) {
      detail::note(notes, id.key() + ": ignoring malformed citation_doi");
    }
  }
  return r;
}

}  // namespace kblog
