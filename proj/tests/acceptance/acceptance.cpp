// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <functional>
#include <iostream>
#include <regex>
#include <set>

#include "generators.hpp"
#include "support.hpp"

using namespace kblog;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::string golden_input() { return kblog_test::read_file(kblog_test::golden_dir() / "worked_example.html"); }
std::string golden_expected() { return kblog_test::read_file(kblog_test::golden_dir() / "worked_example.expected.html"); }

EnrichResult enrich_offline(const std::string& text, int concurrency) {
  kblog_test::OfflineRig rig;
  auto services = rig.services();
  return enrich({text, "worked_example.html"}, kblog_test::offline_config(concurrency), services);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome golden_round_trip() {
  Outcome o;
  kblog_test::TempDir dir;
  auto r = kblog_test::run_command(kblog_test::enrich_bin() + " --input " +
                                   q(kblog_test::golden_dir() / "worked_example.html") + " --offline --fixtures " +
                                   q(kblog_test::fixtures_dir()));
  o.require(r.exit_code == 0, "exit code " + std::to_string(r.exit_code));
  const std::string& html = r.out;
  o.require(html == golden_expected(), "output differs from golden file");
  o.require(count(html, "<li id=\"kcite-bib-") == 1, "bibliography entries != 1");
  o.require(count(html, "<a href=\"https://doi.org/10.1371/journal.pone.0012258\">") == 1, "DOI link missing");
  o.require(count(html, "<span class=\"kblog-math\">\\(e=mc^2\\)</span>") == 2 &&
                count(html, "<div class=\"kblog-math\">\\[e=mc^2\\]</div>") == 2,
            "expected four math elements with body e=mc^2");
  o.require(count(html, "class=\"kblog-math-loader\"") == 1, "loader count != 1");
  const std::string entry = "<a href=\"https://www.ebi.ac.uk/biostudies/arrayexpress/studies/E-MEXP-1551\">";
  o.require(count(html, entry + "<i>Saccharomyces cerevisiae</i></a>") == 1, "species substitution");
  o.require(count(html, entry + "2010-02-24</a>") == 1, "release date substitution");
  if (o.pass) o.detail = "golden output matched byte for byte (" + std::to_string(html.size()) + " bytes)";
  return o;
}

Outcome determinism() {
  Outcome o;
  const std::string expected = golden_expected();
  std::size_t runs = 0;
  for (int conc : {1, 2, 8})
    for (int i = 0; i < 10; ++i, ++runs)
      o.require(enrich_offline(golden_input(), conc).html == expected,
                "run " + std::to_string(i) + " at concurrency " + std::to_string(conc) + " differs");
  if (o.pass) o.detail = std::to_string(runs) + " runs byte-identical at concurrency 1, 2, 8";
  return o;
}

Outcome cache_contract() {
  Outcome o;
  struct Case {
    std::string markup;
    std::size_t max;
    bool exact;
  };
  std::vector<Case> cases{{"[cite]10.1371/journal.pone.0012258[/cite]", 2, false},
                          {"[cite]10.5061/dryad.fixture1[/cite]", 2, false},
                          {"[cite source=pubmed]17237039[/cite]", 1, true},
                          {"[cite source=pubmed]20808000[/cite]", 1, true},
                          {"[cite]arXiv:1001.0001[/cite]", 1, true},
                          {"[aexp id=\"E-MEXP-1551\"]species[/aexp]", 1, true}};
  std::string all;
  std::size_t bound = 0;
  for (const auto& c : cases) {
    kblog_test::OfflineRig rig;
    auto services = rig.services();
    auto doc = c.markup + " " + c.markup;  // repeats within a run must not refetch
    auto r = enrich({doc}, kblog_test::offline_config(), services);
    auto n = r.report.counts.network_requests;
    o.require(c.exact ? n == c.max : n <= c.max, c.markup + " cost " + std::to_string(n) + " requests");
    o.require(n == rig.http.requests(), "report disagrees with instrumented client");
    all += doc + "\n";
    bound += c.max;
  }
  kblog_test::OfflineRig rig;
  auto services = rig.services();
  auto cold = enrich({all}, kblog_test::offline_config(), services);
  auto warm = enrich({all}, kblog_test::offline_config(), services);
  o.require(cold.report.counts.network_requests <= bound, "combined cold run over bound");
  o.require(warm.report.counts.network_requests == 0, "warm rerun made requests");
  o.require(warm.html == cold.html, "warm output differs");
  if (o.pass)
    o.detail = "cold " + std::to_string(cold.report.counts.network_requests) + " requests for " +
               std::to_string(cases.size()) + " identifiers (DOI <= 2, others 1), warm 0";
  return o;
}

Outcome numbering_oracle() {
  Outcome o;
  std::mt19937 rng(1551);
  std::size_t longest = 0;
  for (int i = 0; i < 1000; ++i) {
    std::size_t alphabet = 1 + rng() % 20, length = rng() % 201;
    std::vector<std::string> keys;
    auto instances = kblog_test::random_citations(rng, alphabet, length, keys);
    longest = std::max(longest, length);
    if (assign_numbers(instances).numbers != kblog_test::numbering_oracle(keys))
      o.require(false, "case " + std::to_string(i) + " disagrees with the oracle");
  }
  if (o.pass) o.detail = "1000 sequences agree (alphabet <= 20, length <= " + std::to_string(longest) + ")";
  return o;
}

Outcome parser_round_trip() {
  Outcome o;
  std::mt19937 rng(2012);
  const std::set<std::string, std::less<>> tags{"cite", "latex", "aexp", "bibliography"};
  std::size_t tokens_seen = 0, masked_seen = 0;
  for (int i = 0; i < 1000; ++i) {
    SourceDocument doc{kblog_test::random_document(rng, i % 2 == 1).text};
    auto masked = find_masked_regions(doc);
    auto tokens = scan_shortcodes(doc, tags, masked);
    auto math = scan_math(doc, masked);
    std::vector<std::pair<Span, std::string>> t_reps, m_reps;
    for (const auto& t : tokens) t_reps.emplace_back(t.span, doc.text.substr(t.span.start, t.span.size()));
    for (const auto& f : math) m_reps.emplace_back(f.span, doc.text.substr(f.span.start, f.span.size()));
    o.require(splice(doc, t_reps) == doc.text && splice(doc, m_reps) == doc.text,
              "round trip failed on document " + std::to_string(i));
    for (const auto& m : masked) {
      for (const auto& t : tokens) o.require(!t.span.intersects(m.span), "token inside masked region");
      for (const auto& f : math) o.require(!f.span.intersects(m.span), "math inside masked region");
    }
    tokens_seen += tokens.size() + math.size();
    masked_seen += masked.size();
  }
  if (o.pass)
    o.detail = "1000 documents, " + std::to_string(tokens_seen) + " tokens, " + std::to_string(masked_seen) +
               " masked regions";
  return o;
}

Outcome machine_readability() {
  Outcome o;
  auto result = enrich_offline(golden_input(), 4);
  std::vector<BibliographicRecord> rendered;
  for (const auto& key : result.numbering.order)
    for (const auto& c : result.citations)
      if (c.classified() && c.identifier->key() == key && c.record) {
        rendered.push_back(*c.record);
        break;
      }
  try {
    o.require(parse_embedded_metadata(result.html) == rendered, "embedded records differ from rendered records");
  } catch (const Error& e) {
    o.require(false, e.what());
  }
  std::set<std::string> hrefs, ids;
  std::regex href_re("href=\"#(kcite-bib-\\d+)\""), id_re("id=\"(kcite-bib-\\d+)\"");
  for (std::sregex_iterator it(result.html.begin(), result.html.end(), href_re), end; it != end; ++it)
    hrefs.insert((*it)[1]);
  for (std::sregex_iterator it(result.html.begin(), result.html.end(), id_re), end; it != end; ++it)
    ids.insert((*it)[1]);
  o.require(!hrefs.empty() && hrefs == ids, "in-text hrefs and bibliography ids are not a bijection");
  if (o.pass)
    o.detail = std::to_string(rendered.size()) + " record(s) parsed back equal; " + std::to_string(hrefs.size()) +
               " href/id pair(s)";
  return o;
}

Outcome error_path() {
  Outcome o;
  kblog_test::TempDir dir;
  kblog_test::write_file(dir.path / "in.html", "<p>[cite]10.5555/no-fixture-here[/cite]</p>\n");
  std::string base = kblog_test::enrich_bin() + " --input " + q(dir.path / "in.html") + " --offline --fixtures " +
                     q(kblog_test::fixtures_dir());
  auto lenient = kblog_test::run_command(base);
  o.require(lenient.exit_code == 0, "without flag: exit " + std::to_string(lenient.exit_code));
  o.require(lenient.out.find("<a class=\"kcite kcite-unresolved\" href=\"https://doi.org/10.5555/no-fixture-here\">") !=
                std::string::npos,
            "unresolved anchor not linked externally");
  auto strict = kblog_test::run_command(base + " --fail-on-unresolved");
  o.require(strict.exit_code == 3, "with flag: exit " + std::to_string(strict.exit_code));
  o.require(strict.err.find("10.5555/no-fixture-here") != std::string::npos, "diagnostic does not name the DOI");
  if (o.pass) o.detail = "exit 0 without --fail-on-unresolved, exit 3 with it";
  return o;
}

Outcome cache_persistence() {
  Outcome o;
  std::mt19937 rng(50);
  CacheStore store;
  for (int i = 0; i < 60; ++i) {
    BibliographicRecord r;
    r.id = "doi:10.1000/p" + std::to_string(i);
    r.title = "Synthetic \"record\" " + std::to_string(i);
    r.url = "https://doi.org/10.1000/p" + std::to_string(i);
    r.entry_type = static_cast<EntryType>(i % 5);
    r.provider = static_cast<Provider>(i % 5);
    r.authors = {{"Family" + std::to_string(i), "G", ""}};
    if (i % 3) r.issued = make_date(1990 + i % 30, 1 + i % 12, i % 2 ? std::optional<int>(1 + i % 28) : std::nullopt);
    if (i % 4 == 0) r.doi = "10.1000/p" + std::to_string(i);
    insert(store, r.id, r, Timestamp{std::chrono::seconds(1600000000 + rng() % 100000000)}, r.provider);
  }
  for (int i = 0; i < 12; ++i) {
    ExperimentRecord e{"E-MEXP-" + std::to_string(1000 + i), {"Saccharomyces cerevisiae"}, "2010-02-24",
                       std::nullopt, {"transcription profiling by array"}};
    if (i % 2) e.name = "Study " + std::to_string(i);
    insert_experiment(store, experiment_key(e.accession), e, Timestamp{std::chrono::seconds(1700000000 + i)});
  }
  kblog_test::TempDir dir;
  auto path = dir.path / "cache.json";
  save(store, path);
  auto loaded = load(path);
  o.require(loaded == store, "load(save(store)) != store");
  save(loaded, dir.path / "again.json");
  o.require(kblog_test::read_file(path) == kblog_test::read_file(dir.path / "again.json"), "re-save not byte-stable");
  if (o.pass)
    o.detail = std::to_string(store.entries.size()) + " entries + " + std::to_string(store.aexp_entries.size()) +
               " aexp entries round-tripped";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"worked-example golden round trip", golden_round_trip},
      {"determinism across concurrency", determinism},
      {"cache contract", cache_contract},
      {"numbering oracle", numbering_oracle},
      {"parser round trip", parser_round_trip},
      {"machine-readable metadata", machine_readability},
      {"error-path exit codes", error_path},
      {"cache persistence", cache_persistence}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << " - " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
