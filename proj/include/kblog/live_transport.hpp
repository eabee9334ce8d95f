#pragma once

// Network-backed transport. Kept out of http.hpp so offline consumers do not
// pull in cpp-httplib.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "kblog/http.hpp"

namespace kblog {

struct LiveTransportOptions {
  std::chrono::milliseconds timeout{10000};
  std::chrono::milliseconds min_host_interval{100};
  std::string user_agent = "kblog-enrich/1.0";
};

class LiveTransport : public Transport {
 public:
  explicit LiveTransport(LiveTransportOptions options = {}) : options_(std::move(options)) {}

  HttpResponse perform(const HttpRequest& request) override {
    auto url = parse_url(request.url);
    if (!url) throw Error(ErrorCode::NetworkError, "unsupported URL " + request.url);
    throttle(url->host);

    httplib::Client client(url->origin());
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_follow_location(false);

    httplib::Headers headers{{"User-Agent", options_.user_agent}};
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Get(url->target, headers);
    if (!result)
      throw Error(ErrorCode::NetworkError, request.url + ": " + httplib::to_string(result.error()));

    HttpResponse response;
    response.status = result->status;
    response.reason = result->reason;
    for (const auto& [k, v] : result->headers) response.headers.emplace_back(k, v);
    response.body = result->body;
    return response;
  }

 private:
  // Enforces the per-host minimum spacing between requests.
  void throttle(const std::string& host) {
    std::chrono::steady_clock::time_point wait_until;
    {
      std::lock_guard lock(mu_);
      auto now = std::chrono::steady_clock::now();
      auto& slot = next_slot_[host];
      wait_until = std::max(slot, now);
      slot = wait_until + options_.min_host_interval;
    }
    std::this_thread::sleep_until(wait_until);
  }

  LiveTransportOptions options_;
  std::mutex mu_;
  std::map<std::string, std::chrono::steady_clock::time_point> next_slot_;
};

}  // namespace kblog
