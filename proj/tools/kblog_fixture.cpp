#include <iostream>

#include <CLI11.hpp>

#include "kblog/http.hpp"
#include "kblog/live_transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Capture and name HTTP replay fixtures."};
  app.require_subcommand(1);

  std::string url, accept, dir = "fixtures";
  auto* capture = app.add_subcommand("capture", "Fetch URL live and store every exchange as a fixture");
  capture->add_option("url", url, "Request URL")->required();
  capture->add_option("--accept", accept, "Accept header");
  capture->add_option("--fixtures", dir, "Fixture directory")->capture_default_str();

  std::string key_url;
  auto* key = app.add_subcommand("key", "Print the fixture file name for URL");
  key->add_option("url", key_url, "Request URL")->required();

  CLI11_PARSE(app, argc, argv);

  if (*key) {
    auto parsed = kblog::parse_url(key_url);
    if (!parsed) {
      std::cerr << "kblog-fixture: unsupported URL " << key_url << "\n";
      return 1;
    }
    std::cout << kblog::fixture_path("", parsed->str()).string() << "\n";
    return 0;
  }

  try {
    kblog::LiveTransport live;
    kblog::RecordingTransport recorder(live, dir);
    kblog::HttpClient client(recorder);
    auto raw = client.get(url, accept);
    for (const auto& [u, path] : recorder.recorded()) std::cout << path.string() << "  " << u << "\n";
    std::cerr << "final status " << raw.status << " (" << raw.media_type << ")\n";
    return 0;
  } catch (const kblog::Error& e) {
    std::cerr << "kblog-fixture: " << e.what() << "\n";
    return 2;
  }
}
