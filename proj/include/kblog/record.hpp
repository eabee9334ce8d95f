#pragma once

// Provider-independent bibliographic records and ArrayExpress experiment
// records, with the CSL-like JSON form used by the cache file and the
// embedded metadata block.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kblog/error.hpp"

namespace kblog {

enum class EntryType { article_journal, dataset, preprint, webpage, other };
enum class Provider { crossref, datacite, pubmed, arxiv, webpage };

inline std::string_view to_string(EntryType t) {
  switch (t) {
    case EntryType::article_journal: return "article-journal";
    case EntryType::dataset: return "dataset";
    case EntryType::preprint: return "preprint";
    case EntryType::webpage: return "webpage";
    case EntryType::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(Provider p) {
  switch (p) {
    case Provider::crossref: return "crossref";
    case Provider::datacite: return "datacite";
    case Provider::pubmed: return "pubmed";
    case Provider::arxiv: return "arxiv";
    case Provider::webpage: return "webpage";
  }
  return "webpage";
}

inline std::optional<EntryType> parse_entry_type(std::string_view s) {
  for (auto t : {EntryType::article_journal, EntryType::dataset, EntryType::preprint, EntryType::webpage,
                 EntryType::other})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline std::optional<Provider> parse_provider(std::string_view s) {
  for (auto p : {Provider::crossref, Provider::datacite, Provider::pubmed, Provider::arxiv, Provider::webpage})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

struct Author {
  std::string family;
  std::string given;
  std::string literal;  // set instead of family/given for collective or unsplittable names

  bool operator==(const Author&) const = default;
};

struct IssuedDate {
  int year = 0;
  std::optional<int> month;
  std::optional<int> day;

  bool operator==(const IssuedDate&) const = default;
};

/// Builds a date only when it satisfies the record's range invariants.
inline std::optional<IssuedDate> make_date(int year, std::optional<int> month = {}, std::optional<int> day = {}) {
  if (year < 1500 || year > 2100) return std::nullopt;
  IssuedDate d{year, {}, {}};
  if (month && *month >= 1 && *month <= 12) {
    d.month = month;
    if (day && *day >= 1 && *day <= 31) d.day = day;
  }
  return d;
}

struct BibliographicRecord {
  std::string id;
  EntryType entry_type = EntryType::other;
  std::string title;
  std::vector<Author> authors;
  std::optional<std::string> container_title;
  std::optional<IssuedDate> issued;
  std::optional<std::string> volume;
  std::optional<std::string> issue;
  std::optional<std::string> pages;
  std::optional<std::string> publisher;
  std::optional<std::string> doi;
  std::string url;
  Provider provider = Provider::webpage;

  bool operator==(const BibliographicRecord&) const = default;
};

struct ExperimentRecord {
  std::string accession;
  std::vector<std::string> species;
  std::optional<std::string> release_date;
  std::optional<std::string> name;
  std::vector<std::string> experiment_types;

  bool operator==(const ExperimentRecord&) const = default;
};

inline nlohmann::json to_json(const BibliographicRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["type"] = to_string(r.entry_type);
  j["title"] = r.title;
  j["author"] = nlohmann::json::array();
  for (const auto& a : r.authors) {
    nlohmann::json aj = nlohmann::json::object();
    if (!a.literal.empty()) {
      aj["literal"] = a.literal;
    } else {
      aj["family"] = a.family;
      if (!a.given.empty()) aj["given"] = a.given;
    }
    j["author"].push_back(std::move(aj));
  }
  auto opt = [&](const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
  };
  opt("container-title", r.container_title);
  opt("volume", r.volume);
  opt("issue", r.issue);
  opt("page", r.pages);
  opt("publisher", r.publisher);
  opt("DOI", r.doi);
  if (r.issued) {
    nlohmann::json parts = nlohmann::json::array({r.issued->year});
    if (r.issued->month) {
      parts.push_back(*r.issued->month);
      if (r.issued->day) parts.push_back(*r.issued->day);
    }
    j["issued"] = {{"date-parts", nlohmann::json::array({parts})}};
  }
  j["URL"] = r.url;
  j["provider"] = to_string(r.provider);
  return j;
}

inline BibliographicRecord record_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::CorruptCache, "bad record: " + why); };
  if (!j.is_object()) throw fail("not an object");
  try {
    BibliographicRecord r;
    r.id = j.at("id").get<std::string>();
    auto type = parse_entry_type(j.at("type").get<std::string>());
    if (!type) throw fail("unknown type");
    r.entry_type = *type;
    r.title = j.at("title").get<std::string>();
    for (const auto& aj : j.at("author")) {
      Author a;
      if (aj.contains("literal")) {
        a.literal = aj.at("literal").get<std::string>();
      } else {
        a.family = aj.at("family").get<std::string>();
        a.given = aj.value("given", std::string());
      }
      r.authors.push_back(std::move(a));
    }
    auto opt = [&](const char* key, std::optional<std::string>& v) {
      if (j.contains(key)) v = j.at(key).get<std::string>();
    };
    opt("container-title", r.container_title);
    opt("volume", r.volume);
    opt("issue", r.issue);
    opt("page", r.pages);
    opt("publisher", r.publisher);
    opt("DOI", r.doi);
    if (j.contains("issued")) {
      const auto& parts = j.at("issued").at("date-parts").at(0);
      IssuedDate d;
      d.year = parts.at(0).get<int>();
      if (parts.size() > 1) d.month = parts.at(1).get<int>();
      if (parts.size() > 2) d.day = parts.at(2).get<int>();
      r.issued = d;
    }
    r.url = j.at("URL").get<std::string>();
    auto provider = parse_provider(j.at("provider").get<std::string>());
    if (!provider) throw fail("unknown provider");
    r.provider = *provider;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
}

inline nlohmann::json to_json(const ExperimentRecord& r) {
  nlohmann::json j;
  j["accession"] = r.accession;
  j["species"] = r.species;
  j["experiment_types"] = r.experiment_types;
  if (r.release_date) j["release_date"] = *r.release_date;
  if (r.name) j["name"] = *r.name;
  return j;
}

inline ExperimentRecord experiment_from_json(const nlohmann::json& j) {
  try {
    ExperimentRecord r;
    r.accession = j.at("accession").get<std::string>();
    r.species = j.at("species").get<std::vector<std::string>>();
    r.experiment_types = j.at("experiment_types").get<std::vector<std::string>>();
    if (j.contains("release_date")) r.release_date = j.at("release_date").get<std::string>();
    if (j.contains("name")) r.name = j.at("name").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCache, std::string("bad experiment record: ") + e.what());
  }
}

}  // namespace kblog
