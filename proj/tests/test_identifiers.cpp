#include <gtest/gtest.h>

#include "kblog/identifiers.hpp"
#include "support.hpp"

using namespace kblog;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

}  // namespace

TEST(Classify, BareDoiHasUnknownAgency) {
  auto id = classify("10.1371/journal.pone.0012258");
  EXPECT_EQ(id, (Identifier{IdentifierKind::doi_unknown_agency, "10.1371/journal.pone.0012258"}));
}

TEST(Classify, DoiWrapperAndCaseFolded) {
  EXPECT_EQ(classify("doi:10.1371/JOURNAL.pone.0012258"), classify("10.1371/journal.pone.0012258"));
  EXPECT_EQ(classify("https://doi.org/10.1371/journal.pone.0012258").value, "10.1371/journal.pone.0012258");
  EXPECT_EQ(classify("http://dx.doi.org/10.1371/journal.pone.0012258").value, "10.1371/journal.pone.0012258");
}

TEST(Classify, DeclaredSourceMismatch) {
  EXPECT_EQ(code_of([] { classify("species", "doi"); }), ErrorCode::SourceMismatch);
  EXPECT_EQ(code_of([] { classify("10.1371/x", "pubmed"); }), ErrorCode::SourceMismatch);
  EXPECT_EQ(code_of([] { classify("123", "isbn"); }), ErrorCode::SourceMismatch);
}

TEST(Classify, DeclaredPubmed) {
  EXPECT_EQ(classify("17237039", "pubmed"), (Identifier{IdentifierKind::pubmed, "17237039"}));
  EXPECT_EQ(classify("PMID:17237039", "pmid"), (Identifier{IdentifierKind::pubmed, "17237039"}));
}

TEST(Classify, AutoDetectionOrder) {
  EXPECT_EQ(classify("1001.0001").kind, IdentifierKind::arxiv);
  EXPECT_EQ(classify("arXiv:1001.0001v2"), (Identifier{IdentifierKind::arxiv, "1001.0001v2"}));
  EXPECT_EQ(classify("hep-th/9901001"), (Identifier{IdentifierKind::arxiv, "hep-th/9901001"}));
  EXPECT_EQ(classify("17237039").kind, IdentifierKind::pubmed);
  EXPECT_EQ(classify("https://example.org/x"), (Identifier{IdentifierKind::url, "https://example.org/x"}));
}

TEST(Classify, PubmedGrammar) {
  EXPECT_EQ(code_of([] { classify("0", "pubmed"); }), ErrorCode::SourceMismatch);
  EXPECT_EQ(code_of([] { classify("0123", "pubmed"); }), ErrorCode::SourceMismatch);
  EXPECT_EQ(code_of([] { classify("123456789", "pubmed"); }), ErrorCode::SourceMismatch);
}

TEST(Classify, NothingMatches) {
  EXPECT_EQ(code_of([] { classify("not-an-id"); }), ErrorCode::NoGrammarMatches);
  EXPECT_EQ(code_of([] { classify("ftp://example.org/x"); }), ErrorCode::NoGrammarMatches);
}

TEST(Classify, StrictModeRequiresPrefixForNonDoi) {
  EXPECT_EQ(code_of([] { classify("17237039", std::nullopt, true); }), ErrorCode::NoGrammarMatches);
  EXPECT_EQ(classify("10.1371/journal.pone.0012258", std::nullopt, true).kind, IdentifierKind::doi_unknown_agency);
  EXPECT_EQ(classify("pmid:17237039", std::nullopt, true).kind, IdentifierKind::pubmed);
  EXPECT_EQ(classify("17237039", "pubmed", true).kind, IdentifierKind::pubmed);
}

TEST(CanonicalDoi, Examples) {
  EXPECT_EQ(canonical_doi("10.1371/journal.pone.0012258"), "10.1371/journal.pone.0012258");
  EXPECT_EQ(canonical_doi("HTTPS://DOI.ORG/10.1371/Journal.Pone.0012258"), "10.1371/journal.pone.0012258");
  EXPECT_EQ(code_of([] { canonical_doi("10..bad"); }), ErrorCode::MalformedDoi);
  EXPECT_EQ(code_of([] { canonical_doi("10.123/x"); }), ErrorCode::MalformedDoi);
}

TEST(ExternalUrl, Templates) {
  EXPECT_EQ(external_url(classify("10.1371/journal.pone.0012258")), "https://doi.org/10.1371/journal.pone.0012258");
  EXPECT_EQ(external_url({IdentifierKind::pubmed, "17237039"}), "https://pubmed.ncbi.nlm.nih.gov/17237039/");
  EXPECT_EQ(external_url({IdentifierKind::arxiv, "1001.0001"}), "https://arxiv.org/abs/1001.0001");
  EXPECT_EQ(external_url({IdentifierKind::url, "https://example.org/x"}), "https://example.org/x");
}

TEST(IdentifierKey, AgencyDoesNotChangeKey) {
  Identifier a{IdentifierKind::doi_crossref, "10.1/x"}, b{IdentifierKind::doi_unknown_agency, "10.1/x"};
  EXPECT_EQ(a.key(), b.key());
  EXPECT_EQ(a.key(), "doi:10.1/x");
}

TEST(RegistrationAgency, FixtureAgencies) {
  kblog_test::OfflineRig rig;
  EXPECT_EQ(registration_agency("10.1371/journal.pone.0012258", rig.ra).kind, AgencyKind::crossref);
  EXPECT_EQ(registration_agency("10.5061/dryad.fixture1", rig.ra).kind, AgencyKind::datacite);
  auto other = registration_agency("10.4000/fixture.1", rig.ra);
  EXPECT_EQ(other.kind, AgencyKind::other);
  EXPECT_EQ(other.name, "OP");
}

TEST(RegistrationAgency, UnknownDoi) {
  kblog_test::OfflineRig rig;
  EXPECT_EQ(code_of([&] { registration_agency("10.99999/nonexistent-prefix-xyz", rig.ra); }), ErrorCode::UnknownDoi);
}

TEST(RegistrationAgency, MemoizedPerPrefix) {
  kblog_test::OfflineRig rig;
  registration_agency("10.1371/journal.pone.0012258", rig.ra);
  // Same prefix, no fixture for this DOI: served from the memo.
  EXPECT_EQ(registration_agency("10.1371/journal.pone.9999999", rig.ra).kind, AgencyKind::crossref);
  EXPECT_EQ(rig.counter.count(), 1u);
}

TEST(RegistrationAgency, OfflineWithoutFixture) {
  kblog_test::OfflineRig rig;
  EXPECT_EQ(code_of([&] { registration_agency("10.5555/no-fixture", rig.ra); }), ErrorCode::NetworkError);
}

TEST(RegistrationAgency, CaseInsensitiveAgencyName) {
  RawResponse raw{R"([{"DOI":"10.1/x","RA":"DATACITE"}])", "application/json", 200, "u"};
  EXPECT_EQ(parse_ra_response(raw, "10.1/x").kind, AgencyKind::datacite);
}
