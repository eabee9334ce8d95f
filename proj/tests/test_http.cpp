#include <gtest/gtest.h>

#include "kblog/http.hpp"
#include "support.hpp"

using namespace kblog;
namespace fs = std::filesystem;

namespace {

// Scripted transport: URL -> response.
struct MapTransport : Transport {
  std::map<std::string, HttpResponse> responses;
  int failures_before_success = 0;
  HttpResponse perform(const HttpRequest& r) override {
    if (failures_before_success > 0) {
      --failures_before_success;
      throw Error(ErrorCode::NetworkError, "flaky");
    }
    auto it = responses.find(r.url);
    if (it == responses.end()) throw Error(ErrorCode::NetworkError, "no route " + r.url);
    return it->second;
  }
};

HttpResponse redirect(int status, std::string to) { return {status, "", {{"Location", std::move(to)}}, ""}; }

}  // namespace

TEST(Url, ParseAndResolve) {
  auto u = parse_url("https://Example.org:8443/a/b?c=d");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->host, "example.org");
  EXPECT_EQ(u->port, 8443);
  EXPECT_EQ(u->target, "/a/b?c=d");
  EXPECT_EQ(u->str(), "https://example.org:8443/a/b?c=d");
  EXPECT_EQ(parse_url("http://example.org")->str(), "http://example.org/");
  EXPECT_FALSE(parse_url("ftp://example.org/"));
  EXPECT_EQ(resolve_location(*u, "/x"), "https://example.org:8443/x");
  EXPECT_EQ(resolve_location(*u, "y"), "https://example.org:8443/a/y");
  EXPECT_EQ(resolve_location(*u, "http://other.net/z"), "http://other.net/z");
}

TEST(Sha256, KnownVector) {
  // FIPS 180-2 test vector for "abc".
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Fixture, FormatParseRoundTrip) {
  HttpResponse r{303, "See Other", {{"Location", "https://x/y"}, {"X-A", "b: c"}}, "body\r\nwith\n\nlines"};
  auto back = parse_fixture(format_fixture(r));
  EXPECT_EQ(back.status, 303);
  EXPECT_EQ(back.reason, "See Other");
  EXPECT_EQ(back.headers, r.headers);
  EXPECT_EQ(back.body, r.body);
}

TEST(Fixture, AcceptsCrlfHeaders) {
  auto r = parse_fixture("HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n\r\n<p>");
  EXPECT_EQ(r.header("content-type"), "text/html");
  EXPECT_EQ(r.body, "<p>");
}

TEST(Fixture, RejectsGarbage) {
  EXPECT_THROW(parse_fixture("hello"), Error);
  EXPECT_THROW(parse_fixture("HTTP/1.1 200 OK\nno-colon\n\n"), Error);
}

TEST(Fixture, IndexNamesMatchUrlHashes) {
  auto index = kblog_test::read_file(kblog_test::fixtures_dir() / "INDEX.md");
  std::istringstream lines(index);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("| `", 0) != 0) continue;
    auto u0 = line.find('`') + 1, u1 = line.find('`', u0);
    auto f0 = line.find('`', u1 + 1) + 1, f1 = line.find('`', f0);
    std::string url = line.substr(u0, u1 - u0), file = line.substr(f0, f1 - f0);
    EXPECT_EQ(parse_url(url)->str(), url) << "fixture URLs must already be normalized";
    EXPECT_EQ(fixture_path(kblog_test::fixtures_dir(), url).filename().string(), file) << url;
    EXPECT_TRUE(fs::exists(kblog_test::fixtures_dir() / file)) << file;
    ++rows;
  }
  EXPECT_GE(rows, 15);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(kblog_test::fixtures_dir())) files += e.path().extension() == ".http";
  EXPECT_EQ(files, static_cast<std::size_t>(rows)) << "every fixture file is indexed";
}

TEST(FixtureTransport, MissingFixtureIsNetworkError) {
  FixtureTransport t{kblog_test::fixtures_dir()};
  try {
    t.perform({"https://nowhere.invalid/", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NetworkError);
  }
}

TEST(RecordingTransport, WritesReplayableFixtures) {
  kblog_test::TempDir dir;
  MapTransport inner;
  inner.responses["https://a.test/x"] = {200, "OK", {{"Content-Type", "text/plain"}}, "hello"};
  RecordingTransport rec(inner, dir.path);
  HttpClient(rec).get("https://a.test/x");
  FixtureTransport replay(dir.path);
  auto r = replay.perform({"https://a.test/x", {}});
  EXPECT_EQ(r.body, "hello");
  EXPECT_EQ(rec.recorded().size(), 1u);
}

TEST(HttpClient, FollowsRedirectsAsOneRequest) {
  MapTransport t;
  t.responses["https://a.test/1"] = redirect(303, "/2");
  t.responses["https://a.test/2"] = redirect(302, "https://b.test/3");
  t.responses["https://b.test/3"] = {200, "OK", {{"Content-Type", "application/json"}}, "{}"};
  CountingTransport counter(t);
  HttpClient http(counter);
  auto raw = http.get("https://a.test/1", "application/json");
  EXPECT_EQ(raw.status, 200);
  EXPECT_EQ(raw.media_type, "application/json");
  EXPECT_EQ(raw.source_url, "https://b.test/3");
  EXPECT_EQ(http.requests(), 1u);
  EXPECT_EQ(counter.count(), 3u);
}

TEST(HttpClient, RedirectLimit) {
  MapTransport t;
  t.responses["https://a.test/loop"] = redirect(301, "/loop");
  HttpClient http(t, HttpOptions{3, 0});
  EXPECT_THROW(http.get("https://a.test/loop"), Error);
}

TEST(HttpClient, RetriesTransportFailures) {
  MapTransport t;
  t.responses["https://a.test/"] = {200, "OK", {}, "ok"};
  t.failures_before_success = 2;
  EXPECT_THROW(HttpClient(t, HttpOptions{5, 1}).get("https://a.test/"), Error);
  t.failures_before_success = 2;
  EXPECT_EQ(HttpClient(t, HttpOptions{5, 2}).get("https://a.test/").bytes, "ok");
}

TEST(CheckStatus, MapsTerminalStatuses) {
  auto code = [](int status) {
    try {
      check_status(RawResponse{"", "", status, "u"}, "x");
      return std::optional<ErrorCode>{};
    } catch (const Error& e) {
      return std::optional<ErrorCode>{e.code()};
    }
  };
  EXPECT_EQ(code(200), std::nullopt);
  EXPECT_EQ(code(404), ErrorCode::NotFound);
  EXPECT_EQ(code(410), ErrorCode::NotFound);
  EXPECT_EQ(code(500), ErrorCode::NetworkError);
}
