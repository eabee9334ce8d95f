#pragma once

// Persistent identifier -> record store with fetch timestamps and a TTL.

#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kblog/error.hpp"
#include "kblog/record.hpp"

namespace kblog {

using Timestamp = std::chrono::sys_seconds;
using Ttl = std::chrono::seconds;

inline constexpr Ttl kDefaultTtl = std::chrono::days(30);

struct CacheEntry {
  BibliographicRecord record;
  Timestamp fetched_at{};
  Provider provider = Provider::webpage;
  bool operator==(const CacheEntry&) const = default;
};

struct ExperimentEntry {
  ExperimentRecord record;
  Timestamp fetched_at{};
  bool operator==(const ExperimentEntry&) const = default;
};

struct CacheStore {
  static constexpr int kVersion = 1;
  int version = kVersion;
  std::map<std::string, CacheEntry> entries;
  std::map<std::string, ExperimentEntry> aexp_entries;
  bool operator==(const CacheStore&) const = default;
};

enum class Freshness { hit, stale, miss };

template <class Record>
struct Lookup {
  Freshness state = Freshness::miss;
  std::optional<Record> record;
};

namespace detail {

template <class Map>
auto lookup_in(const Map& map, const std::string& key, Timestamp now, Ttl ttl)
    -> Lookup<decltype(map.begin()->second.record)> {
  auto it = map.find(key);
  if (it == map.end()) return {};
  Freshness state = now - it->second.fetched_at <= ttl ? Freshness::hit : Freshness::stale;
  return {state, it->second.record};
}

}  // namespace detail

/// hit iff present and no older than `ttl`; stale if present but older.
inline Lookup<BibliographicRecord> lookup(const CacheStore& store, const std::string& key, Timestamp now, Ttl ttl) {
  return detail::lookup_in(store.entries, key, now, ttl);
}

inline Lookup<ExperimentRecord> lookup_experiment(const CacheStore& store, const std::string& key, Timestamp now,
                                                  Ttl ttl) {
  return detail::lookup_in(store.aexp_entries, key, now, ttl);
}

inline std::string experiment_key(std::string_view accession) { return "aexp:" + std::string(accession); }

inline void insert(CacheStore& store, const std::string& key, BibliographicRecord record, Timestamp now,
                   Provider provider) {
  if (record.id != key) throw Error(ErrorCode::KeyMismatch, "record id '" + record.id + "' stored under '" + key + "'");
  store.entries[key] = CacheEntry{std::move(record), now, provider};
}

inline void insert_experiment(CacheStore& store, const std::string& key, ExperimentRecord record, Timestamp now) {
  if (experiment_key(record.accession) != key)
    throw Error(ErrorCode::KeyMismatch, "experiment '" + record.accession + "' stored under '" + key + "'");
  store.aexp_entries[key] = ExperimentEntry{std::move(record), now};
}

inline nlohmann::json to_json(const CacheStore& store) {
  nlohmann::json j;
  j["version"] = store.version;
  j["entries"] = nlohmann::json::object();
  for (const auto& [key, e] : store.entries)
    j["entries"][key] = {{"fetched_at", e.fetched_at.time_since_epoch().count()},
                         {"provider", to_string(e.provider)},
                         {"record", to_json(e.record)}};
  j["aexp_entries"] = nlohmann::json::object();
  for (const auto& [key, e] : store.aexp_entries)
    j["aexp_entries"][key] = {{"fetched_at", e.fetched_at.time_since_epoch().count()}, {"record", to_json(e.record)}};
  return j;
}

inline CacheStore cache_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::CorruptCache, why); };
  if (!j.is_object()) throw fail("cache root is not an object");
  CacheStore store;
  try {
    store.version = j.at("version").get<int>();
    if (store.version != CacheStore::kVersion) throw fail("unsupported cache version " + std::to_string(store.version));
    auto stamp = [&](const nlohmann::json& e) {
      auto secs = e.at("fetched_at").get<std::int64_t>();
      if (secs <= 0) throw fail("fetched_at must be positive");
      return Timestamp(std::chrono::seconds(secs));
    };
    for (const auto& [key, e] : j.at("entries").items()) {
      CacheEntry entry;
      entry.fetched_at = stamp(e);
      auto provider = parse_provider(e.at("provider").get<std::string>());
      if (!provider) throw fail("unknown provider in entry " + key);
      entry.provider = *provider;
      entry.record = record_from_json(e.at("record"));
      if (entry.record.id != key) throw fail("entry key '" + key + "' does not match record id");
      store.entries.emplace(key, std::move(entry));
    }
    if (j.contains("aexp_entries")) {
      for (const auto& [key, e] : j.at("aexp_entries").items()) {
        ExperimentEntry entry;
        entry.fetched_at = stamp(e);
        entry.record = experiment_from_json(e.at("record"));
        if (experiment_key(entry.record.accession) != key) throw fail("aexp key '" + key + "' does not match record");
        store.aexp_entries.emplace(key, std::move(entry));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  return store;
}

/// A missing file is an empty store; anything unreadable is CorruptCache.
inline CacheStore load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) return {};
    throw Error(ErrorCode::IoError, "cannot read cache " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::CorruptCache, "cache " + path.string() + " is not valid JSON");
  return cache_from_json(j);
}

/// Writes to a sibling temp file and renames it over `path`.
inline void save(const CacheStore& store, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << to_json(store).dump(2) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
  }
}

/// CacheStore behind a reader/writer lock for concurrent resolution.
class SyncCache {
 public:
  SyncCache() = default;
  explicit SyncCache(CacheStore store) : store_(std::move(store)) {}

  Lookup<BibliographicRecord> lookup(const std::string& key, Timestamp now, Ttl ttl) const {
    std::shared_lock lock(mu_);
    return kblog::lookup(store_, key, now, ttl);
  }
  Lookup<ExperimentRecord> lookup_experiment(const std::string& key, Timestamp now, Ttl ttl) const {
    std::shared_lock lock(mu_);
    return kblog::lookup_experiment(store_, key, now, ttl);
  }
  void insert(const std::string& key, BibliographicRecord record, Timestamp now, Provider provider) {
    std::unique_lock lock(mu_);
    kblog::insert(store_, key, std::move(record), now, provider);
  }
  void insert_experiment(const std::string& key, ExperimentRecord record, Timestamp now) {
    std::unique_lock lock(mu_);
    kblog::insert_experiment(store_, key, std::move(record), now);
  }
  CacheStore snapshot() const {
    std::shared_lock lock(mu_);
    return store_;
  }
  void replace(CacheStore store) {
    std::unique_lock lock(mu_);
    store_ = std::move(store);
  }

 private:
  mutable std::shared_mutex mu_;
  CacheStore store_;
};

}  // namespace kblog
