#pragma once

// HTTP plumbing shared by all metadata providers: a single-hop Transport
// interface, fixture replay/recording keyed by sha256(request URL), and the
// redirect-following client that counts logical requests.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kblog/error.hpp"
#include "kblog/text.hpp"

namespace kblog {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

inline std::optional<std::string> find_header(const HeaderList& headers, std::string_view name) {
  for (const auto& [k, v] : headers)
    if (text::iequals(k, name)) return v;
  return std::nullopt;
}

struct HttpRequest {
  std::string url;
  HeaderList headers;
};

struct HttpResponse {
  int status = 0;
  std::string reason;
  HeaderList headers;
  std::string body;

  std::optional<std::string> header(std::string_view name) const { return find_header(headers, name); }
  bool is_redirect() const {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
  }
};

/// Body plus the facts the normalizers need about where it came from.
struct RawResponse {
  std::string bytes;
  std::string media_type;
  int status = 0;
  std::string source_url;
};

struct Url {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string target = "/";  // path + query

  std::string origin() const {
    bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return scheme + "://" + host + (default_port ? "" : ":" + std::to_string(port));
  }
  std::string str() const { return origin() + target; }
};

inline std::optional<Url> parse_url(std::string_view s) {
  Url u;
  auto sep = s.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  u.scheme = text::to_lower(s.substr(0, sep));
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  std::string_view rest = s.substr(sep + 3);
  auto slash = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, slash);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (authority.empty()) return std::nullopt;
  u.port = u.scheme == "https" ? 443 : 80;
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    std::string_view port = authority.substr(colon + 1);
    if (!text::all_digits(port) || port.size() > 5) return std::nullopt;
    u.port = std::stoi(std::string(port));
    authority = authority.substr(0, colon);
  }
  u.host = text::to_lower(authority);
  if (u.host.empty()) return std::nullopt;
  if (slash != std::string_view::npos) {
    std::string_view target = rest.substr(slash);
    if (auto hash = target.find('#'); hash != std::string_view::npos) target = target.substr(0, hash);
    u.target = std::string(target);
    if (u.target.empty() || u.target.front() != '/') u.target.insert(u.target.begin(), '/');
  }
  return u;
}

/// Resolves a Location header against the URL that produced it.
inline std::string resolve_location(const Url& base, std::string_view location) {
  if (location.find("://") != std::string_view::npos) return std::string(location);
  if (location.substr(0, 2) == "//") return base.scheme + ":" + std::string(location);
  if (!location.empty() && location.front() == '/') return base.origin() + std::string(location);
  std::string path = base.target.substr(0, base.target.find('?'));
  path = path.substr(0, path.rfind('/') + 1);
  return base.origin() + path + std::string(location);
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

// Fixture files: status line, headers, blank line, body (replayed verbatim).

inline std::filesystem::path fixture_path(const std::filesystem::path& dir, std::string_view url) {
  return dir / (sha256_hex(url) + ".http");
}

inline HttpResponse parse_fixture(std::string_view data, std::string_view origin = "fixture") {
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::IoError, "bad fixture " + std::string(origin) + ": " + why);
  };
  auto next_line = [&](std::size_t& pos) -> std::optional<std::string_view> {
    if (pos >= data.size()) return std::nullopt;
    auto nl = data.find('\n', pos);
    std::string_view line = data.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? data.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  std::size_t pos = 0;
  auto status_line = next_line(pos);
  if (!status_line || !text::istarts_with(*status_line, "HTTP/")) throw fail("missing status line");
  auto parts = text::split_ws(*status_line);
  if (parts.size() < 2 || !text::all_digits(parts[1])) throw fail("malformed status line");
  HttpResponse r;
  r.status = std::stoi(parts[1]);
  auto reason_at = status_line->find(parts[1]) + parts[1].size();
  r.reason = std::string(text::trim(status_line->substr(reason_at)));
  for (;;) {
    auto line = next_line(pos);
    if (!line) throw fail("missing blank line after headers");
    if (line->empty()) break;
    auto colon = line->find(':');
    if (colon == std::string_view::npos) throw fail("malformed header line");
    r.headers.emplace_back(std::string(text::trim(line->substr(0, colon))),
                           std::string(text::trim(line->substr(colon + 1))));
  }
  r.body = std::string(data.substr(pos));
  return r;
}

inline std::string format_fixture(const HttpResponse& r) {
  std::string out = "HTTP/1.1 " + std::to_string(r.status);
  if (!r.reason.empty()) out += " " + r.reason;
  out += "\n";
  for (const auto& [k, v] : r.headers) out += k + ": " + v + "\n";
  out += "\n";
  out += r.body;
  return out;
}

/// One request/response exchange; never follows redirects.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse perform(const HttpRequest& request) = 0;
};

/// Offline transport: answers only from fixture files, everything else is a
/// NetworkError.
class FixtureTransport : public Transport {
 public:
  explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

  HttpResponse perform(const HttpRequest& request) override {
    auto path = fixture_path(dir_, request.url);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NetworkError, "offline: no fixture for " + request.url);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_fixture(buf.str(), path.string());
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Forwards to another transport and writes every response as a fixture.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(Transport& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}

  HttpResponse perform(const HttpRequest& request) override {
    HttpResponse r = inner_.perform(request);
    std::filesystem::create_directories(dir_);
    auto path = fixture_path(dir_, request.url);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write fixture " + path.string());
    out << format_fixture(r);
    std::lock_guard lock(mu_);
    recorded_.emplace_back(request.url, path);
    return r;
  }

  std::vector<std::pair<std::string, std::filesystem::path>> recorded() const {
    std::lock_guard lock(mu_);
    return recorded_;
  }

 private:
  Transport& inner_;
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::filesystem::path>> recorded_;
};

/// Counts exchanges (redirect hops included) on their way to another transport.
class CountingTransport : public Transport {
 public:
  explicit CountingTransport(Transport& inner) : inner_(inner) {}

  HttpResponse perform(const HttpRequest& request) override {
    ++count_;
    {
      std::lock_guard lock(mu_);
      urls_.push_back(request.url);
    }
    return inner_.perform(request);
  }

  std::size_t count() const { return count_.load(); }
  std::vector<std::string> urls() const {
    std::lock_guard lock(mu_);
    return urls_;
  }

 private:
  Transport& inner_;
  std::atomic<std::size_t> count_{0};
  mutable std::mutex mu_;
  std::vector<std::string> urls_;
};

struct HttpOptions {
  int max_redirects = 5;
  int retries = 0;
};

/// Logical GET: follows redirects (303 included) up to the configured limit and
/// retries transport failures. Each call is one request in `requests()`.
class HttpClient {
 public:
  explicit HttpClient(Transport& transport, HttpOptions options = {}) : transport_(transport), options_(options) {}

  RawResponse get(const std::string& url, std::string_view accept = {}) {
    ++requests_;
    std::string current = url;
    for (int hop = 0;; ++hop) {
      auto parsed = parse_url(current);
      if (!parsed) throw Error(ErrorCode::NetworkError, "unsupported URL " + current);
      HttpRequest request{parsed->str(), {}};
      if (!accept.empty()) request.headers.emplace_back("Accept", std::string(accept));
      HttpResponse response = perform_with_retries(request);
      if (response.is_redirect()) {
        auto location = response.header("Location");
        if (!location) throw Error(ErrorCode::NetworkError, "redirect without Location from " + current);
        if (hop >= options_.max_redirects)
          throw Error(ErrorCode::NetworkError, "too many redirects fetching " + url);
        current = resolve_location(*parsed, *location);
        continue;
      }
      RawResponse raw;
      raw.status = response.status;
      raw.media_type = response.header("Content-Type").value_or("");
      raw.bytes = std::move(response.body);
      raw.source_url = request.url;
      return raw;
    }
  }

  std::size_t requests() const { return requests_.load(); }
  const HttpOptions& options() const { return options_; }

 private:
  HttpResponse perform_with_retries(const HttpRequest& request) {
    for (int attempt = 0;; ++attempt) {
      try {
        return transport_.perform(request);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NetworkError || attempt >= options_.retries) throw;
      }
    }
  }

  Transport& transport_;
  HttpOptions options_;
  std::atomic<std::size_t> requests_{0};
};

/// Maps a terminal status to the engine's error vocabulary.
inline void check_status(const RawResponse& raw, std::string_view what) {
  if (raw.status >= 200 && raw.status < 300) return;
  std::string msg = std::string(what) + ": HTTP " + std::to_string(raw.status) + " from " + raw.source_url;
  if (raw.status == 404 || raw.status == 410) throw Error(ErrorCode::NotFound, msg);
  throw Error(ErrorCode::NetworkError, msg);
}

}  // namespace kblog
