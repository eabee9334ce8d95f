#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>

#include "kblog/live_transport.hpp"
#include "kblog/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kUnresolved = 3 };

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path) {
  std::ostringstream buf;
  if (path == "-") {
    buf << std::cin.rdbuf();
    if (std::cin.bad()) throw IoFailure("cannot read standard input");
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& data) {
  if (path == "-") {
    std::cout << data << std::flush;
    if (!std::cout) throw IoFailure("cannot write standard output");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << data)) throw IoFailure("cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Enrich a document: resolve [cite] and [aexp] shortcodes, normalize math."};
  std::string input, output = "-", cache, fixtures, report_json;
  std::string renderer{kblog::kDefaultRendererUrl};
  int ttl_days = 30, timeout_ms = 10000, concurrency = 4;
  bool offline = false, fail_on_unresolved = false, no_embed_json = false, strict = false;

  app.add_option("--input", input, "Input document, - for stdin")->required();
  app.add_option("--output", output, "Output document, - for stdout")->capture_default_str();
  app.add_option("--cache", cache, "Metadata cache file (JSON)");
  app.add_flag("--offline", offline, "Resolve only from fixtures");
  app.add_option("--fixtures", fixtures, "Fixture directory for offline replay");
  app.add_option("--ttl-days", ttl_days, "Cache time-to-live in days")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--concurrency", concurrency, "Parallel lookups")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--fail-on-unresolved", fail_on_unresolved, "Exit 3 when any citation is unresolved");
  app.add_flag("--no-embed-json", no_embed_json, "Omit the kcite-metadata JSON block");
  app.add_option("--math-renderer-url", renderer, "Client-side math renderer script")->capture_default_str();
  app.add_flag("--strict-sources", strict, "Only auto-detect DOIs and prefixed identifiers");
  app.add_option("--report-json", report_json, "Write the run report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  kblog::EnrichConfig config;
  if (!cache.empty()) config.cache_path = cache;
  config.offline = offline;
  if (!fixtures.empty()) config.fixtures_dir = fixtures;
  config.ttl = std::chrono::days(ttl_days);
  config.timeout = std::chrono::milliseconds(timeout_ms);
  config.concurrency = concurrency;
  config.fail_on_unresolved = fail_on_unresolved;
  config.embed_json = !no_embed_json;
  config.math_renderer_url = renderer;
  config.strict_sources = strict;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "kblog-enrich: " << e.what() << "\n";
    return kUsage;
  }

  kblog::RunReport report;
  std::string origin = input == "-" ? "<stdin>" : input;
  auto fail = [&](const std::string& message) {
    report.diagnostics.push_back({kblog::Severity::error, 0, 0, message});
    std::cerr << report.to_text(origin);
    return kIo;
  };
  try {
    kblog::SourceDocument doc{read_input(input), origin};

    std::unique_ptr<kblog::Transport> transport;
    if (offline) {
      transport = std::make_unique<kblog::FixtureTransport>(*config.fixtures_dir);
    } else {
      kblog::LiveTransportOptions live;
      live.timeout = config.timeout;
      transport = std::make_unique<kblog::LiveTransport>(live);
    }
    kblog::Engine engine(config, std::move(transport));
    kblog::EnrichResult result = engine.run(doc);
    report = result.report;

    write_output(output, result.html);
    engine.save_cache();
    if (!report_json.empty()) write_output(report_json, report.to_json().dump(2) + "\n");
    std::cerr << report.to_text(origin);
    return result.failed(config) ? kUnresolved : kOk;
  } catch (const IoFailure& e) {
    return fail(e.what());
  } catch (const kblog::Error& e) {
    return fail(e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(e.what());
  }
}
