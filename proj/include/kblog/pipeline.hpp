#pragma once

// scan -> resolve -> number -> render -> splice, plus the run report.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kblog/arrayexpress.hpp"
#include "kblog/cache.hpp"
#include "kblog/citations.hpp"
#include "kblog/http.hpp"
#include "kblog/identifiers.hpp"
#include "kblog/math.hpp"
#include "kblog/resolver.hpp"
#include "kblog/scanner.hpp"

namespace kblog {

inline constexpr std::string_view kDefaultRendererUrl = "https://cdn.jsdelivr.net/npm/mathjax@3/es5/tex-mml-chtml.js";

struct EnrichConfig {
  std::optional<std::filesystem::path> cache_path;
  bool offline = false;
  std::optional<std::filesystem::path> fixtures_dir;
  Ttl ttl = kDefaultTtl;
  std::chrono::milliseconds timeout{10000};
  int concurrency = 4;
  bool fail_on_unresolved = false;
  bool embed_json = true;
  std::string math_renderer_url{kDefaultRendererUrl};
  bool strict_sources = false;
  bool stale_if_error = true;
  HttpOptions http;
  std::optional<Timestamp> now;  // pinned clock for reproducible cache timestamps

  void validate() const {
    if (offline && !fixtures_dir) throw std::invalid_argument("offline mode requires a fixtures directory");
    if (concurrency < 1) throw std::invalid_argument("concurrency must be at least 1");
    if (ttl.count() < 0) throw std::invalid_argument("ttl must not be negative");
  }
};

struct RunCounts {
  std::size_t citations_total = 0;
  std::size_t citations_resolved = 0;
  std::size_t citations_unresolved = 0;
  std::size_t citations_invalid = 0;  // bodies that match no identifier grammar
  std::size_t math_fragments = 0;
  std::size_t aexp_substitutions = 0;
  std::size_t cache_hits = 0;
  std::size_t network_requests = 0;
  bool operator==(const RunCounts&) const = default;
};

struct ReportDiagnostic {
  Severity severity = Severity::warn;
  std::size_t line = 0;  // 0 when the message is not tied to the document
  std::size_t column = 0;
  std::string message;
};

struct RunReport {
  RunCounts counts;
  std::vector<ReportDiagnostic> diagnostics;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["counts"] = {{"citations_total", counts.citations_total},
                   {"citations_resolved", counts.citations_resolved},
                   {"citations_unresolved", counts.citations_unresolved},
                   {"citations_invalid", counts.citations_invalid},
                   {"math_fragments", counts.math_fragments},
                   {"aexp_substitutions", counts.aexp_substitutions},
                   {"cache_hits", counts.cache_hits},
                   {"network_requests", counts.network_requests}};
    j["diagnostics"] = nlohmann::json::array();
    for (const auto& d : diagnostics)
      j["diagnostics"].push_back(
          {{"severity", to_string(d.severity)}, {"line", d.line}, {"column", d.column}, {"message", d.message}});
    return j;
  }

  std::string to_text(std::string_view origin) const {
    std::string out;
    for (const auto& d : diagnostics) {
      out += std::string(origin);
      if (d.line > 0) out += ":" + std::to_string(d.line) + ":" + std::to_string(d.column);
      out += ": " + std::string(to_string(d.severity)) + ": " + d.message + "\n";
    }
    const auto& c = counts;
    out += "citations: " + std::to_string(c.citations_total) + " (" + std::to_string(c.citations_resolved) +
           " resolved, " + std::to_string(c.citations_unresolved) + " unresolved, " +
           std::to_string(c.citations_invalid) + " invalid)\n";
    out += "math fragments: " + std::to_string(c.math_fragments) + "\n";
    out += "aexp substitutions: " + std::to_string(c.aexp_substitutions) + "\n";
    out += "cache hits: " + std::to_string(c.cache_hits) + ", network requests: " +
           std::to_string(c.network_requests) + "\n";
    return out;
  }
};

struct EnrichResult {
  std::string html;
  RunReport report;
  std::vector<CitationInstance> citations;
  NumberingMap numbering;

  /// True when the configuration asks for failure on unresolved citations and there are some.
  bool failed(const EnrichConfig& config) const {
    return config.fail_on_unresolved &&
           (report.counts.citations_unresolved > 0 || report.counts.citations_invalid > 0);
  }
};

struct EnrichServices {
  HttpClient& http;
  RaClient& ra;
  SyncCache& cache;
};

namespace detail {

inline const std::set<std::string, std::less<>>& pipeline_tags() {
  static const std::set<std::string, std::less<>> tags{"cite", "aexp", "bibliography"};
  return tags;
}

// Runs `job(i)` for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome is independent of scheduling.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) job(i);
  };
  std::size_t extra = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1))) ;
  std::vector<std::jthread> pool;
  for (std::size_t k = 1; k < extra; ++k) pool.emplace_back(drain);
  drain();
}

inline std::string insert_before_body_end(std::string html, const std::string& block) {
  if (block.empty()) return html;
  auto body_end = text::irfind(html, "</body>");
  if (body_end != std::string::npos) {
    html.insert(body_end, block);
    return html;
  }
  if (!html.empty() && html.back() != '\n') html += "\n";
  html += block;
  return html;
}

struct Outcome {
  std::optional<BibliographicRecord> record;
  std::optional<ExperimentRecord> experiment;
  std::string error;
  Notes notes;
  bool cache_hit = false;
};

}  // namespace detail

/// Enriches one document. Output depends only on the document, the
/// configuration and the cache/fixture content; never on thread timing.
inline EnrichResult enrich(const SourceDocument& doc, const EnrichConfig& config, EnrichServices& services) {
  config.validate();
  const Timestamp now = config.now.value_or(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
  const std::size_t requests_before = services.http.requests();

  EnrichResult result;
  Diagnostics diags;

  // 1-2. mask and scan
  auto masked = find_masked_regions(doc);
  auto tokens = scan_shortcodes(doc, detail::pipeline_tags(), masked, &diags);
  auto fragments = scan_math(doc, masked, &diags);

  // Shortcodes and math are lexed independently; keep the earlier of any two
  // overlapping claims.
  {
    std::vector<ShortcodeToken> kept_tokens;
    std::vector<MathFragment> kept_math;
    std::size_t ti = 0, mi = 0, claimed = 0;
    while (ti < tokens.size() || mi < fragments.size()) {
      bool take_token = mi >= fragments.size() ||
                        (ti < tokens.size() && tokens[ti].span.start <= fragments[mi].span.start);
      const Span span = take_token ? tokens[ti].span : fragments[mi].span;
      if (span.start < claimed) {
        diags.push_back({Severity::warn, span.start, "markup overlaps an earlier shortcode or math fragment; left unchanged"});
      } else {
        claimed = span.end;
        if (take_token) kept_tokens.push_back(tokens[ti]);
        else kept_math.push_back(fragments[mi]);
      }
      take_token ? ++ti : ++mi;
    }
    tokens = std::move(kept_tokens);
    fragments = std::move(kept_math);
  }

  // 3. resolve citations and experiments, cache first, in parallel
  result.citations = collect_citations(tokens, config.strict_sources);
  std::vector<Identifier> ids;
  std::map<std::string, std::size_t> id_slot;
  std::map<std::string, std::size_t> first_offset;
  for (const auto& c : result.citations) {
    if (!c.classified()) continue;
    auto key = c.identifier->key();
    if (id_slot.emplace(key, ids.size()).second) {
      ids.push_back(*c.identifier);
      first_offset[key] = c.span.start;
    }
  }

  struct AexpUse {
    const ShortcodeToken* token;
    std::optional<AexpRequest> request;
    std::string error;
  };
  std::vector<AexpUse> aexp_uses;
  std::vector<ArrayExpressAccession> accessions;
  std::map<std::string, std::size_t> acc_slot;
  for (const auto& t : tokens) {
    if (t.name != "aexp") continue;
    AexpUse use{&t, std::nullopt, {}};
    try {
      use.request.emplace(parse_aexp_token(t));
      if (acc_slot.emplace(use.request->accession.value(), accessions.size()).second)
        accessions.push_back(use.request->accession);
    } catch (const Error& e) {
      use.error = e.message();
    }
    aexp_uses.push_back(std::move(use));
  }

  MetadataResolver resolver(services.http, services.ra);
  const ResolveOptions resolve_options{config.ttl, config.stale_if_error};
  std::vector<detail::Outcome> outcomes(ids.size() + accessions.size());
  detail::parallel_for(outcomes.size(), config.concurrency, [&](std::size_t i) {
    auto& out = outcomes[i];
    try {
      if (i < ids.size()) {
        out.record = resolver.resolve(ids[i], services.cache, now, resolve_options, &out.notes, &out.cache_hit);
      } else {
        out.experiment = resolve_experiment(accessions[i - ids.size()], services.http, services.cache, now,
                                            config.ttl, config.stale_if_error, &out.cache_hit);
      }
    } catch (const Error& e) {
      out.error = e.what();
    } catch (const std::exception& e) {
      out.error = std::string("NetworkError: ") + e.what();
    }
  });

  auto& counts = result.report.counts;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& out = outcomes[i];
    if (out.cache_hit) ++counts.cache_hits;
    std::size_t offset = i < ids.size() ? first_offset[ids[i].key()] : 0;
    if (i >= ids.size()) {
      const auto& acc = accessions[i - ids.size()];
      for (const auto& use : aexp_uses)
        if (use.request && use.request->accession == acc) {
          offset = use.token->span.start;
          break;
        }
    }
    for (const auto& n : out.notes) diags.push_back({Severity::warn, offset, n});
    if (!out.error.empty()) {
      std::string what = i < ids.size() ? "unresolved citation " + ids[i].key() : "unresolved experiment " +
                                                                                      accessions[i - ids.size()].value();
      diags.push_back({Severity::error, offset, what + ": " + out.error});
    }
  }

  for (auto& c : result.citations) {
    ++counts.citations_total;
    if (!c.classified()) {
      ++counts.citations_invalid;
      diags.push_back({Severity::error, c.span.start, "invalid citation: " + c.error});
      continue;
    }
    const auto& out = outcomes[id_slot.at(c.identifier->key())];
    if (out.record) {
      c.status = CitationStatus::resolved;
      c.record = out.record;
      ++counts.citations_resolved;
    } else {
      c.status = CitationStatus::unresolved;
      c.error = out.error;
      ++counts.citations_unresolved;
    }
  }

  // 4. numbering
  result.numbering = assign_numbers(result.citations);
  const std::string bibliography = build_bibliography(result.numbering, result.citations);

  // 5-6. replacements, spliced in one pass
  std::vector<std::pair<Span, std::string>> replacements;
  for (const auto& c : result.citations) replacements.emplace_back(c.span, format_intext(c, result.numbering));

  for (const auto& use : aexp_uses) {
    if (!use.request) {
      diags.push_back({Severity::error, use.token->span.start, "aexp: " + use.error});
      replacements.emplace_back(use.token->span, aexp_error_span(use.error));
      continue;
    }
    const auto& out = outcomes[ids.size() + acc_slot.at(use.request->accession.value())];
    if (!out.experiment) {
      replacements.emplace_back(use.token->span, aexp_error_span(out.error));
      continue;
    }
    std::string html = substitute(*use.token, *out.experiment);
    if (html.rfind("<a ", 0) == 0) ++counts.aexp_substitutions;
    else diags.push_back({Severity::warn, use.token->span.start, "aexp: substitution produced an error span"});
    replacements.emplace_back(use.token->span, std::move(html));
  }

  bool placeholder_used = false;
  for (const auto& t : tokens) {
    if (t.name != "bibliography") continue;
    if (placeholder_used) {
      diags.push_back({Severity::warn, t.span.start, "duplicate [bibliography] placeholder removed"});
      replacements.emplace_back(t.span, std::string());
      continue;
    }
    placeholder_used = true;
    replacements.emplace_back(t.span, bibliography);
  }

  std::size_t rendered_math = 0;
  for (const auto& f : fragments) {
    if (f.syntax == MathSyntax::mathml) {
      replacements.emplace_back(f.span, passthrough_mathml(f));
      ++rendered_math;
      continue;
    }
    try {
      replacements.emplace_back(f.span, render_math(normalize_fragment(f)));
      ++rendered_math;
    } catch (const Error& e) {
      diags.push_back({Severity::warn, f.span.start, e.message() + "; left unchanged"});
    }
  }
  counts.math_fragments = rendered_math;

  std::string html = splice(doc, std::move(replacements));

  // 6-7. bibliography and metadata block at the end of the document
  const bool any_classified = !result.numbering.empty();
  std::string tail;
  if (any_classified && !placeholder_used)
    tail += "<h2 class=\"kcite-heading\">References</h2>\n" + bibliography + "\n";
  if (any_classified && config.embed_json) tail += embed_metadata_json(result.numbering, result.citations) + "\n";
  html = detail::insert_before_body_end(std::move(html), tail);

  // 8. math renderer
  html = inject_renderer(std::move(html), rendered_math, config.math_renderer_url);

  counts.network_requests = services.http.requests() - requests_before;

  std::stable_sort(diags.begin(), diags.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
  for (const auto& d : diags) {
    auto lc = line_column(doc.text, d.offset);
    result.report.diagnostics.push_back({d.severity, lc.line, lc.column, d.message});
  }
  result.html = std::move(html);
  return result;
}

/// Owns the transport, HTTP client and cache for a configuration.
class Engine {
 public:
  /// Offline engine replaying `config.fixtures_dir`.
  explicit Engine(EnrichConfig config) : config_(std::move(config)) {
    config_.validate();
    if (!config_.offline) throw std::invalid_argument("online mode needs a transport");
    owned_ = std::make_unique<FixtureTransport>(*config_.fixtures_dir);
    transport_ = owned_.get();
    init();
  }

  /// Takes ownership of `transport`.
  Engine(EnrichConfig config, std::unique_ptr<Transport> transport)
      : config_(std::move(config)), owned_(std::move(transport)), transport_(owned_.get()) {
    config_.validate();
    init();
  }

  /// Uses a caller-supplied transport (tests, instrumentation).
  Engine(EnrichConfig config, Transport& transport) : config_(std::move(config)), transport_(&transport) {
    config_.validate();
    init();
  }

  EnrichResult run(const SourceDocument& doc) {
    EnrichServices services{*http_, *ra_, cache_};
    EnrichResult result = enrich(doc, config_, services);
    if (!startup_.empty()) {
      result.report.diagnostics.insert(result.report.diagnostics.begin(), startup_.begin(), startup_.end());
      startup_.clear();
    }
    return result;
  }

  void save_cache() const {
    if (config_.cache_path) save(cache_.snapshot(), *config_.cache_path);
  }

  SyncCache& cache() { return cache_; }
  HttpClient& http() { return *http_; }
  const EnrichConfig& config() const { return config_; }

 private:
  void init() {
    http_ = std::make_unique<HttpClient>(*transport_, config_.http);
    ra_ = std::make_unique<RaClient>(*http_);
    if (config_.cache_path) {
      try {
        cache_.replace(load(*config_.cache_path));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CorruptCache) throw;
        startup_.push_back({Severity::warn, 0, 0, std::string(e.what()) + "; starting with an empty cache"});
      }
    }
  }

  EnrichConfig config_;
  std::unique_ptr<Transport> owned_;
  Transport* transport_ = nullptr;
  std::unique_ptr<HttpClient> http_;
  std::unique_ptr<RaClient> ra_;
  SyncCache cache_;
  std::vector<ReportDiagnostic> startup_;
};

}  // namespace kblog
