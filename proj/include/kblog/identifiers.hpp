#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "kblog/error.hpp"
#include "kblog/http.hpp"
#include "kblog/text.hpp"

namespace kblog {

enum class IdentifierKind { doi_crossref, doi_datacite, doi_unknown_agency, pubmed, arxiv, url };

inline std::string_view to_string(IdentifierKind k) {
  switch (k) {
    case IdentifierKind::doi_crossref: return "doi-crossref";
    case IdentifierKind::doi_datacite: return "doi-datacite";
    case IdentifierKind::doi_unknown_agency: return "doi-unknown-agency";
    case IdentifierKind::pubmed: return "pubmed";
    case IdentifierKind::arxiv: return "arxiv";
    case IdentifierKind::url: return "url";
  }
  return "?";
}

struct Identifier {
  IdentifierKind kind = IdentifierKind::url;
  std::string value;

  bool is_doi() const {
    return kind == IdentifierKind::doi_crossref || kind == IdentifierKind::doi_datacite ||
           kind == IdentifierKind::doi_unknown_agency;
  }

  /// Canonical key shared by the cache, the numbering and record ids. DOIs of
  /// any agency share one key.
  std::string key() const {
    if (is_doi()) return "doi:" + value;
    switch (kind) {
      case IdentifierKind::pubmed: return "pmid:" + value;
      case IdentifierKind::arxiv: return "arxiv:" + value;
      default: return "url:" + value;
    }
  }

  bool operator==(const Identifier&) const = default;
};

namespace detail {

inline std::string_view strip_prefix_ci(std::string_view s, std::initializer_list<std::string_view> prefixes,
                                        bool* stripped = nullptr) {
  for (auto p : prefixes) {
    if (text::istarts_with(s, p)) {
      if (stripped) *stripped = true;
      return text::trim(s.substr(p.size()));
    }
  }
  return s;
}

inline bool doi_grammar(std::string_view s) {
  if (s.size() < 3 || s.substr(0, 3) != "10.") return false;
  std::size_t i = 3;
  std::size_t digits = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++digits;
  if (digits < 4 || digits > 9) return false;
  if (i >= s.size() || s[i] != '/') return false;
  ++i;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i)
    if (text::is_space(s[i])) return false;
  return true;
}

struct Candidate {
  Identifier id;
  bool prefixed = false;  // self-declaring wrapper such as `PMID:` or a resolver URL
};

inline std::optional<Candidate> try_doi(std::string_view s) {
  bool stripped = false;
  s = strip_prefix_ci(s, {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/", "doi:"},
                      &stripped);
  std::string lower = text::to_lower(s);
  if (!doi_grammar(lower)) return std::nullopt;
  return Candidate{{IdentifierKind::doi_unknown_agency, lower}, stripped};
}

inline bool arxiv_grammar(std::string_view s) {
  static const std::regex modern(R"(\d{4}\.\d{4,5}(v\d+)?)");
  static const std::regex legacy(R"([a-z-]+(\.[A-Z]{2})?/\d{7})");
  return std::regex_match(s.begin(), s.end(), modern) || std::regex_match(s.begin(), s.end(), legacy);
}

inline std::optional<Candidate> try_arxiv(std::string_view s) {
  bool stripped = false;
  s = strip_prefix_ci(s, {"https://arxiv.org/abs/", "http://arxiv.org/abs/", "https://export.arxiv.org/abs/",
                          "arxiv:"},
                      &stripped);
  if (!arxiv_grammar(s)) return std::nullopt;
  return Candidate{{IdentifierKind::arxiv, std::string(s)}, stripped};
}

inline bool pubmed_grammar(std::string_view s) {
  return text::all_digits(s) && s.size() <= 8 && s.front() != '0';
}

inline std::optional<Candidate> try_pubmed(std::string_view s) {
  bool stripped = false;
  s = strip_prefix_ci(s, {"https://pubmed.ncbi.nlm.nih.gov/", "http://pubmed.ncbi.nlm.nih.gov/",
                          "https://www.ncbi.nlm.nih.gov/pubmed/", "http://www.ncbi.nlm.nih.gov/pubmed/", "pmid:"},
                      &stripped);
  if (stripped && !s.empty() && s.back() == '/') s.remove_suffix(1);
  if (!pubmed_grammar(s)) return std::nullopt;
  return Candidate{{IdentifierKind::pubmed, std::string(s)}, stripped};
}

inline std::optional<Candidate> try_url(std::string_view s) {
  if (!text::istarts_with(s, "http://") && !text::istarts_with(s, "https://")) return std::nullopt;
  for (char c : s)
    if (text::is_space(c) || c == '"' || c == '<' || c == '>') return std::nullopt;
  if (!parse_url(s)) return std::nullopt;
  return Candidate{{IdentifierKind::url, std::string(s)}, false};
}

}  // namespace detail

/// Lowercase, wrapper-free DOI. Throws MalformedDoi.
inline std::string canonical_doi(std::string_view raw) {
  auto c = detail::try_doi(text::trim(raw));
  if (!c) throw Error(ErrorCode::MalformedDoi, "not a DOI: '" + std::string(raw) + "'");
  return c->id.value;
}

/// Classifies a citation body. `declared_source` is the `source` attribute
/// (doi, pubmed, arxiv, url). Without it the grammars are tried in the order
/// DOI, arXiv, PubMed, URL; under `strict` only DOIs and self-declaring
/// prefixed forms are detected automatically.
inline Identifier classify(std::string_view raw, std::optional<std::string_view> declared_source = std::nullopt,
                           bool strict = false) {
  std::string_view s = text::trim(raw);
  if (s.empty()) throw Error(ErrorCode::NoGrammarMatches, "empty identifier");

  if (declared_source) {
    std::string source = text::to_lower(text::trim(*declared_source));
    std::optional<detail::Candidate> c;
    if (source == "doi") c = detail::try_doi(s);
    else if (source == "pubmed" || source == "pmid") c = detail::try_pubmed(s);
    else if (source == "arxiv") c = detail::try_arxiv(s);
    else if (source == "url") c = detail::try_url(s);
    else throw Error(ErrorCode::SourceMismatch, "unknown source '" + source + "'");
    if (!c) throw Error(ErrorCode::SourceMismatch, "'" + std::string(s) + "' is not a valid " + source + " identifier");
    return c->id;
  }

  if (auto c = detail::try_doi(s)) return c->id;
  for (auto attempt : {detail::try_arxiv, detail::try_pubmed, detail::try_url}) {
    if (auto c = attempt(s)) {
      if (strict && !c->prefixed)
        throw Error(ErrorCode::NoGrammarMatches, "'" + std::string(s) + "' looks like a " +
                                                     std::string(to_string(c->id.kind)) +
                                                     " identifier; strict mode requires a source attribute");
      return c->id;
    }
  }
  throw Error(ErrorCode::NoGrammarMatches, "'" + std::string(s) + "' matches no identifier grammar");
}

inline std::string external_url(const Identifier& id) {
  if (id.is_doi()) return "https://doi.org/" + id.value;
  switch (id.kind) {
    case IdentifierKind::pubmed: return "https://pubmed.ncbi.nlm.nih.gov/" + id.value + "/";
    case IdentifierKind::arxiv: return "https://arxiv.org/abs/" + id.value;
    default: return id.value;
  }
}

/// Percent-encodes a DOI for use as a URL path.
inline std::string encode_doi_path(std::string_view doi) {
  static constexpr std::string_view safe = "-._~/:;()@!$&'*+,=";
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : doi) {
    if (std::isalnum(c) || safe.find(static_cast<char>(c)) != std::string_view::npos) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

enum class AgencyKind { crossref, datacite, other };

struct RegistrationAgency {
  AgencyKind kind = AgencyKind::other;
  std::string name;
  bool operator==(const RegistrationAgency&) const = default;
};

inline std::string ra_url(std::string_view doi) { return "https://doi.org/ra/" + encode_doi_path(doi); }

inline RegistrationAgency parse_ra_response(const RawResponse& raw, std::string_view doi) {
  if (raw.status == 404) throw Error(ErrorCode::UnknownDoi, std::string(doi));
  check_status(raw, "registration agency lookup");
  nlohmann::json body = nlohmann::json::parse(raw.bytes, nullptr, false);
  if (body.is_discarded() || !body.is_array() || body.empty() || !body[0].is_object())
    throw Error(ErrorCode::MalformedMetadata, "unexpected RA response for " + std::string(doi));
  const auto& entry = body[0];
  if (!entry.contains("RA") || !entry["RA"].is_string()) {
    std::string status = entry.value("status", std::string("no RA reported"));
    throw Error(ErrorCode::UnknownDoi, std::string(doi) + ": " + status);
  }
  std::string name = entry["RA"].get<std::string>();
  if (text::iequals(name, "crossref")) return {AgencyKind::crossref, name};
  if (text::iequals(name, "datacite")) return {AgencyKind::datacite, name};
  return {AgencyKind::other, name};
}

/// Registration-agency lookup against doi.org, memoized per DOI prefix.
class RaClient {
 public:
  explicit RaClient(HttpClient& http) : http_(http) {}

  RegistrationAgency lookup(const std::string& doi) {
    std::string prefix = doi.substr(0, doi.find('/'));
    {
      std::lock_guard lock(mu_);
      if (auto it = memo_.find(prefix); it != memo_.end()) return it->second;
    }
    RegistrationAgency agency = parse_ra_response(http_.get(ra_url(doi), "application/json"), doi);
    std::lock_guard lock(mu_);
    memo_[prefix] = agency;
    return agency;
  }

 private:
  HttpClient& http_;
  std::mutex mu_;
  std::map<std::string, RegistrationAgency> memo_;
};

inline RegistrationAgency registration_agency(const std::string& doi, RaClient& client) { return client.lookup(doi); }

}  // namespace kblog
