#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "kblog/pipeline.hpp"

namespace kblog_test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return KBLOG_SOURCE_DIR; }
inline fs::path fixtures_dir() { return source_dir() / "fixtures"; }
inline fs::path golden_dir() { return source_dir() / "tests" / "golden"; }
inline std::string enrich_bin() { return KBLOG_ENRICH_BIN; }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << data;
}

inline kblog::Timestamp fixed_now() { return kblog::Timestamp{std::chrono::seconds{1700000000}}; }

// Unique scratch directory removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path = fs::temp_directory_path() / ("kblog-test-" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Fixture replay behind a request counter, plus the client stack the pipeline needs.
struct OfflineRig {
  kblog::FixtureTransport fixtures{fixtures_dir()};
  kblog::CountingTransport counter{fixtures};
  kblog::HttpClient http{counter};
  kblog::RaClient ra{http};
  kblog::SyncCache cache;

  kblog::EnrichServices services() { return {http, ra, cache}; }
};

inline kblog::EnrichConfig offline_config(int concurrency = 4) {
  kblog::EnrichConfig c;
  c.offline = true;
  c.fixtures_dir = fixtures_dir();
  c.concurrency = concurrency;
  c.now = fixed_now();
  return c;
}

inline kblog::RawResponse fixture_get(const std::string& url, std::string_view accept = {}) {
  kblog::FixtureTransport t{fixtures_dir()};
  kblog::HttpClient http{t};
  return http.get(url, accept);
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs `args` through /bin/sh with stdout and stderr captured to files.
inline CommandResult run_command(const std::string& args) {
  TempDir tmp;
  auto out = tmp.path / "out", err = tmp.path / "err";
  std::string cmd = args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

}  // namespace kblog_test
