#pragma once

// ArrayExpress accessions: BioStudies lookup and `[aexp]` field substitution.

#include <algorithm>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kblog/cache.hpp"
#include "kblog/error.hpp"
#include "kblog/http.hpp"
#include "kblog/scanner.hpp"
#include "kblog/text.hpp"

namespace kblog {

class ArrayExpressAccession {
 public:
  explicit ArrayExpressAccession(std::string value) : value_(std::move(value)) {
    static const std::regex pattern(R"(E-[A-Z]{4}-\d+)");
    if (!std::regex_match(value_, pattern))
      throw Error(ErrorCode::BadAccession, "'" + value_ + "' is not an ArrayExpress accession (E-XXXX-n)");
  }

  const std::string& value() const { return value_; }
  std::string entry_url() const { return "https://www.ebi.ac.uk/biostudies/arrayexpress/studies/" + value_; }
  std::string api_url() const { return "https://www.ebi.ac.uk/biostudies/api/v1/studies/" + value_; }
  bool operator==(const ArrayExpressAccession&) const = default;

 private:
  std::string value_;
};

enum class ExperimentField { species, releasedate, name, experimenttype };

inline std::optional<ExperimentField> parse_experiment_field(std::string_view s) {
  auto f = text::to_lower(text::trim(s));
  if (f == "species") return ExperimentField::species;
  if (f == "releasedate") return ExperimentField::releasedate;
  if (f == "name") return ExperimentField::name;
  if (f == "experimenttype") return ExperimentField::experimenttype;
  return std::nullopt;
}

namespace detail {

inline void collect_attributes(const nlohmann::json& node, std::vector<std::pair<std::string, std::string>>& out) {
  if (!node.is_object() || !node.contains("attributes") || !node.at("attributes").is_array()) return;
  for (const auto& a : node.at("attributes")) {
    if (!a.is_object() || !a.contains("name") || !a.contains("value")) continue;
    if (!a.at("name").is_string() || !a.at("value").is_string()) continue;
    out.emplace_back(text::to_lower(a.at("name").get<std::string>()),
                     text::collapse_whitespace(a.at("value").get<std::string>()));
  }
}

inline void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace detail

/// BioStudies study JSON -> ExperimentRecord. Study-level attributes win over
/// those of the top-level section.
inline ExperimentRecord parse_biostudies(const RawResponse& raw, const ArrayExpressAccession& acc) {
  if (raw.status == 404 || raw.status == 410) throw Error(ErrorCode::NotFound, acc.value() + ": no such study");
  check_status(raw, acc.value());
  auto j = nlohmann::json::parse(raw.bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::MalformedMetadata, acc.value() + ": study payload is not a JSON object");
  if (j.value("status", std::string()) == "FAIL") throw Error(ErrorCode::NotFound, acc.value() + ": no such study");

  std::vector<std::pair<std::string, std::string>> attrs;
  detail::collect_attributes(j, attrs);
  if (j.contains("section")) detail::collect_attributes(j.at("section"), attrs);

  ExperimentRecord r;
  r.accession = acc.value();
  static const std::regex iso_date(R"(\d{4}-\d{2}-\d{2})");
  for (const auto& [name, value] : attrs) {
    if (name == "organism") detail::push_unique(r.species, value);
    else if (name == "study type" || name == "experiment type") detail::push_unique(r.experiment_types, value);
    else if (name == "title" && !r.name && !value.empty()) r.name = value;
    else if ((name == "releasedate" || name == "release date") && !r.release_date && value.size() >= 10 &&
             std::regex_match(value.substr(0, 10), iso_date))
      r.release_date = value.substr(0, 10);
  }
  if (!r.release_date && j.contains("releaseDate") && j.at("releaseDate").is_string()) {
    auto v = j.at("releaseDate").get<std::string>();
    if (v.size() >= 10 && std::regex_match(v.substr(0, 10), iso_date)) r.release_date = v.substr(0, 10);
  }
  if (r.species.empty() && !r.release_date)
    throw Error(ErrorCode::MalformedMetadata, acc.value() + ": study has neither organism nor release date");
  return r;
}

/// Cache-first lookup under `aexp:{accession}`.
inline ExperimentRecord resolve_experiment(const ArrayExpressAccession& acc, HttpClient& http, SyncCache& cache,
                                           Timestamp now, Ttl ttl, bool stale_if_error = true,
                                           bool* cache_hit = nullptr) {
  const std::string key = experiment_key(acc.value());
  auto cached = cache.lookup_experiment(key, now, ttl);
  if (cache_hit) *cache_hit = cached.state == Freshness::hit;
  if (cached.state == Freshness::hit) return *cached.record;
  try {
    ExperimentRecord record = parse_biostudies(http.get(acc.api_url(), "application/json"), acc);
    cache.insert_experiment(key, record, now);
    return record;
  } catch (const Error& e) {
    if (cached.state == Freshness::stale && stale_if_error && e.code() == ErrorCode::NetworkError)
      return *cached.record;
    throw;
  }
}

inline std::string aexp_error_span(std::string_view message) {
  return "<span class=\"aexp-error\">[aexp: " + text::escape_html(message) + "]</span>";
}

struct AexpRequest {
  ArrayExpressAccession accession;
  ExperimentField field;
};

/// Validates an `[aexp]` token without touching the network. Throws
/// BadAccession or UnknownField.
inline AexpRequest parse_aexp_token(const ShortcodeToken& token) {
  ArrayExpressAccession acc(token.attribute("id").value_or(""));
  auto field = parse_experiment_field(token.body.value_or(""));
  if (!field)
    throw Error(ErrorCode::UnknownField, "unknown field \"" + std::string(text::trim(token.body.value_or(""))) + "\"");
  return {std::move(acc), *field};
}

/// Replacement HTML for one `[aexp id="..."]field[/aexp]` token. Field and
/// accession problems render as an inline error span.
inline std::string substitute(const ShortcodeToken& token, const ExperimentRecord& record) {
  std::optional<AexpRequest> request;
  try {
    request.emplace(parse_aexp_token(token));
  } catch (const Error& e) {
    return aexp_error_span(e.message());
  }
  const auto& acc = request->accession;
  const auto field = request->field;

  std::string value;
  bool italic = false;
  switch (field) {
    case ExperimentField::species: {
      for (std::size_t i = 0; i < record.species.size(); ++i) value += (i ? "; " : "") + record.species[i];
      italic = true;
      break;
    }
    case ExperimentField::releasedate: value = record.release_date.value_or(""); break;
    case ExperimentField::name: value = record.name.value_or(""); break;
    case ExperimentField::experimenttype: {
      for (std::size_t i = 0; i < record.experiment_types.size(); ++i)
        value += (i ? "; " : "") + record.experiment_types[i];
      break;
    }
  }
  if (value.empty())
    return aexp_error_span(acc.value() + " has no " + std::string(text::trim(*token.body)) + " metadata");
  std::string inner = text::escape_html(value);
  if (italic) inner = "<i>" + inner + "</i>";
  return "<a href=\"" + text::escape_attr(acc.entry_url()) + "\">" + inner + "</a>";
}

}  // namespace kblog
