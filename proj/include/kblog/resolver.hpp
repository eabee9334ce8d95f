#pragma once

#include <string>

#include "kblog/cache.hpp"
#include "kblog/http.hpp"
#include "kblog/identifiers.hpp"
#include "kblog/normalize.hpp"

namespace kblog {

inline constexpr std::string_view kCslMediaType = "application/vnd.citationstyles.csl+json";

inline std::string pubmed_summary_url(std::string_view pmid) {
  return "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esummary.fcgi?db=pubmed&retmode=json&id=" +
         std::string(pmid);
}

inline std::string arxiv_query_url(std::string_view arxiv_id) {
  return "https://export.arxiv.org/api/query?id_list=" + std::string(arxiv_id);
}

inline std::string doi_url(std::string_view doi) { return "https://doi.org/" + encode_doi_path(doi); }

struct ResolveOptions {
  Ttl ttl = kDefaultTtl;
  bool stale_if_error = true;
};

/// Fetches and normalizes bibliographic metadata, cache first.
class MetadataResolver {
 public:
  MetadataResolver(HttpClient& http, RaClient& ra) : http_(http), ra_(ra) {}

  RawResponse fetch_crossref(const std::string& doi) { return fetch_csl(doi); }
  RawResponse fetch_datacite(const std::string& doi) { return fetch_csl(doi); }

  RawResponse fetch_pubmed(const std::string& pmid) {
    RawResponse raw = http_.get(pubmed_summary_url(pmid), "application/json");
    check_status(raw, "pubmed:" + pmid);
    return raw;
  }

  RawResponse fetch_arxiv(const std::string& arxiv_id) {
    RawResponse raw = http_.get(arxiv_query_url(arxiv_id), "application/atom+xml");
    check_status(raw, "arxiv:" + arxiv_id);
    return raw;
  }

  RawResponse fetch_webpage(const std::string& url) {
    RawResponse raw = http_.get(url, "text/html");
    if (raw.status >= 400) throw Error(ErrorCode::NotFound, url + ": HTTP " + std::to_string(raw.status));
    check_status(raw, url);
    if (detail::media_essence(raw.media_type) != "text/html")
      throw Error(ErrorCode::MalformedMetadata, url + ": not an HTML page (" + raw.media_type + ")");
    return raw;
  }

  /// Network-only path: agency lookup for DOIs, one fetch, normalize.
  BibliographicRecord fetch_record(const Identifier& id, Notes* notes = nullptr) {
    Identifier target = id;
    if (target.kind == IdentifierKind::doi_unknown_agency) {
      auto agency = ra_.lookup(target.value);
      if (agency.kind == AgencyKind::crossref) target.kind = IdentifierKind::doi_crossref;
      else if (agency.kind == AgencyKind::datacite) target.kind = IdentifierKind::doi_datacite;
      else throw Error(ErrorCode::UnsupportedAgency, id.value + " is registered with " + agency.name);
    }
    try {
      switch (target.kind) {
        case IdentifierKind::doi_crossref: return normalize_csl(fetch_crossref(target.value), target, notes);
        case IdentifierKind::doi_datacite: return normalize_csl(fetch_datacite(target.value), target, notes);
        case IdentifierKind::pubmed: return normalize_pubmed(fetch_pubmed(target.value), target, notes);
        case IdentifierKind::arxiv: return normalize_arxiv(fetch_arxiv(target.value), target, notes);
        case IdentifierKind::url: return normalize_webpage(fetch_webpage(target.value), target, notes);
        case IdentifierKind::doi_unknown_agency: break;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedMetadata, id.key() + ": " + e.what());
    }
    throw Error(ErrorCode::UnsupportedAgency, id.value);
  }

  /// Fresh cache entries cost no requests; misses cost one fetch (plus one
  /// agency lookup for DOIs) and are written back. A stale entry is served
  /// when the refresh fails and `stale_if_error` is set.
  BibliographicRecord resolve(const Identifier& id, SyncCache& cache, Timestamp now, const ResolveOptions& options,
                              Notes* notes = nullptr, bool* cache_hit = nullptr) {
    const std::string key = id.key();
    auto cached = cache.lookup(key, now, options.ttl);
    if (cache_hit) *cache_hit = cached.state == Freshness::hit;
    if (cached.state == Freshness::hit) return *cached.record;
    try {
      BibliographicRecord record = fetch_record(id, notes);
      cache.insert(key, record, now, record.provider);
      return record;
    } catch (const Error& e) {
      if (cached.state == Freshness::stale && options.stale_if_error &&
          (e.code() == ErrorCode::NetworkError || e.code() == ErrorCode::MalformedMetadata)) {
        detail::note(notes, key + ": refresh failed (" + std::string(e.what()) + "); using stale cache entry");
        return *cached.record;
      }
      throw;
    }
  }

  HttpClient& http() { return http_; }

 private:
  RawResponse fetch_csl(const std::string& doi) {
    RawResponse raw = http_.get(doi_url(doi), kCslMediaType);
    check_status(raw, "doi:" + doi);
    if (detail::media_essence(raw.media_type).find("json") == std::string::npos)
      throw Error(ErrorCode::MalformedMetadata, "doi:" + doi + ": content negotiation returned " + raw.media_type);
    return raw;
  }

  HttpClient& http_;
  RaClient& ra_;
};

}  // namespace kblog
