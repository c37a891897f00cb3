#pragma once

// Completion/embedding client with a content-addressed record/replay cache.
// Replayed runs are byte-for-byte deterministic and never touch the network.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "venndi/detail/sha256.hpp"
#include "venndi/detail/text.hpp"
#include "venndi/error.hpp"

namespace venndi::llm {

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.1;
  std::optional<int> max_tokens;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model;
};

enum class CacheMode { record, replay_strict, passthrough };

inline std::string to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::record: return "record";
    case CacheMode::replay_strict: return "replay_strict";
    case CacheMode::passthrough: return "passthrough";
  }
  return "passthrough";
}

inline CacheMode parse_cache_mode(std::string_view text) {
  if (text == "record") return CacheMode::record;
  if (text == "replay_strict" || text == "replay") return CacheMode::replay_strict;
  if (text == "passthrough" || text == "off") return CacheMode::passthrough;
  throw ValidationError("unknown cache mode \"" + std::string(text) + "\"",
                        {std::string(text)});
}

// Canonical request string: endpoint, newline, then the body with object keys
// sorted. Two requests that differ only in JSON field order share a key.
inline std::string canonicalize_request(std::string_view endpoint,
                                        const nlohmann::json& body) {
  return std::string(endpoint) + "\n" + body.dump();
}

inline std::string cache_key(std::string_view endpoint, const nlohmann::json& body) {
  return detail::sha256_hex(canonicalize_request(endpoint, body));
}

// One file per request, named <sha256>.json, holding the raw response bytes.
// Writes go through a temp file and an atomic rename so a crashed run never
// leaves a truncated entry behind.
class ReplayCache {
 public:
  ReplayCache() = default;
  ReplayCache(std::filesystem::path dir, CacheMode mode)
      : dir_(std::move(dir)), mode_(mode) {}

  CacheMode mode() const { return mode_; }
  const std::filesystem::path& dir() const { return dir_; }

  static std::string entry_filename(std::string_view key) {
    return std::string(key) + ".json";
  }

  std::optional<std::string> lookup(std::string_view key) const {
    std::ifstream in(dir_ / entry_filename(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  void store(std::string_view key, std::string_view response) const {
    std::filesystem::create_directories(dir_);
    std::filesystem::path target = dir_ / entry_filename(key);
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp =
        target;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error("cannot write cache entry: " + tmp.string());
      out.write(response.data(), static_cast<std::streamsize>(response.size()));
    }
    std::filesystem::rename(tmp, target);
  }

 private:
  std::filesystem::path dir_;
  CacheMode mode_ = CacheMode::passthrough;
};

// Minimal wire abstraction: POST a JSON body to a path, get raw bytes back.
struct Transport {
  virtual ~Transport() = default;
  virtual std::string post(const std::string& path, const std::string& body) = 0;
};

class FnTransport : public Transport {
 public:
  using Handler = std::function<std::string(const std::string& path, const std::string& body)>;
  explicit FnTransport(Handler handler) : handler_(std::move(handler)) {}
  std::string post(const std::string& path, const std::string& body) override {
    return handler_(path, body);
  }

 private:
  Handler handler_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{200};
  // injectable so tests can observe backoff without sleeping
  std::function<void(std::chrono::milliseconds)> sleep =
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

// Helpers for building wire-shaped responses; used by scripted transports and
// the cache seeding tool so recorded entries look like real API traffic.
inline std::string make_chat_response_json(std::string_view text) {
  nlohmann::json body{
      {"object", "chat.completion"},
      {"choices",
       {{{"index", 0},
         {"message", {{"role", "assistant"}, {"content", std::string(text)}}},
         {"finish_reason", "stop"}}}}};
  return body.dump();
}

inline std::string make_embedding_response_json(const std::vector<double>& values,
                                                std::string_view model) {
  nlohmann::json body{{"object", "list"},
                      {"model", std::string(model)},
                      {"data", {{{"object", "embedding"}, {"index", 0}, {"embedding", values}}}}};
  return body.dump();
}

class Client {
 public:
  Client(std::shared_ptr<Transport> transport, ReplayCache cache, RetryPolicy retry = {})
      : transport_(std::move(transport)), cache_(std::move(cache)), retry_(retry) {
    if (retry_.max_attempts < 1) throw PreconditionError("max_attempts must be >= 1");
  }

  const ReplayCache& cache() const { return cache_; }

  std::string complete(const CompletionRequest& request) {
    if (request.model.empty()) throw PreconditionError("completion request needs a model");
    if (request.prompt.empty()) throw PreconditionError("completion request needs a prompt");
    if (request.temperature < 0.0 || request.temperature > 2.0) {
      throw PreconditionError("temperature must be within [0, 2]");
    }
    nlohmann::json body{
        {"model", request.model},
        {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
        {"temperature", request.temperature}};
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    std::string raw = dispatch("/v1/chat/completions", body);

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("completion response is not JSON: ") + e.what());
    }
    if (parsed.contains("choices") && parsed["choices"].is_array() &&
        !parsed["choices"].empty()) {
      const auto& first = parsed["choices"][0];
      if (first.contains("message") && first["message"].contains("content") &&
          first["message"]["content"].is_string()) {
        return first["message"]["content"].get<std::string>();
      }
      if (first.contains("text") && first["text"].is_string()) {
        return first["text"].get<std::string>();
      }
    }
    throw TransportError("completion response has no choices[0] content");
  }

  EmbeddingVector embed(std::string_view input, const std::string& model) {
    if (input.empty()) throw PreconditionError("cannot embed an empty string");
    if (model.empty()) throw PreconditionError("embedding request needs a model");
    nlohmann::json body{{"model", model}, {"input", std::string(input)}};
    std::string raw = dispatch("/v1/embeddings", body);

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].empty() ||
        !parsed["data"][0].contains("embedding") ||
        !parsed["data"][0]["embedding"].is_array()) {
      throw TransportError("embedding response has no data[0].embedding");
    }
    EmbeddingVector vec;
    vec.model = model;
    for (const auto& v : parsed["data"][0]["embedding"]) {
      if (!v.is_number()) throw TransportError("embedding vector has a non-numeric entry");
      vec.values.push_back(v.get<double>());
    }
    if (vec.values.empty()) throw TransportError("embedding vector is empty");

    std::lock_guard<std::mutex> lock(dims_mutex_);
    auto [it, inserted] = dims_.emplace(model, vec.values.size());
    if (!inserted && it->second != vec.values.size()) {
      throw ValidationError("embedding dimension changed for model \"" + model + "\": " +
                            std::to_string(it->second) + " vs " +
                            std::to_string(vec.values.size()));
    }
    return vec;
  }

 private:
  std::string dispatch(const std::string& endpoint, const nlohmann::json& body) {
    std::string key = llm::cache_key(endpoint, body);
    switch (cache_.mode()) {
      case CacheMode::replay_strict: {
        auto hit = cache_.lookup(key);
        if (!hit) {
          throw CacheMissError("replay cache miss for " + endpoint + " (key " + key + ")",
                               key);
        }
        return *hit;
      }
      case CacheMode::record: {
        std::string response = call_with_retry(endpoint, body.dump());
        cache_.store(key, response);
        return response;
      }
      case CacheMode::passthrough:
        return call_with_retry(endpoint, body.dump());
    }
    throw Error("unreachable cache mode");
  }

  std::string call_with_retry(const std::string& endpoint, const std::string& body) {
    if (!transport_) {
      throw TransportError("no endpoint configured; use replay mode or provide a transport");
    }
    for (int attempt = 0;; ++attempt) {
      try {
        return transport_->post(endpoint, body);
      } catch (const TransportError& e) {
        bool retryable = dynamic_cast<const RateLimitError*>(&e) != nullptr ||
                         dynamic_cast<const ServerError*>(&e) != nullptr;
        if (!retryable || attempt + 1 >= retry_.max_attempts) throw;
        retry_.sleep(retry_.base_backoff * (1 << attempt));
      }
    }
  }

  std::shared_ptr<Transport> transport_;
  ReplayCache cache_;
  RetryPolicy retry_;
  std::mutex dims_mutex_;
  std::map<std::string, std::size_t> dims_;
};

// Deterministic embedding source for offline runs: exact texts come from the
// table, anything else gets a hash-seeded unit vector.
struct MockEmbedder {
  std::map<std::string, std::vector<double>> table;
  std::size_t fallback_dim = 8;

  std::vector<double> vector_for(std::string_view text) const {
    auto it = table.find(std::string(text));
    if (it != table.end()) return it->second;
    std::vector<double> v(fallback_dim);
    std::uint64_t h = detail::fnv1a(text);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < fallback_dim; ++i) {
      std::uint64_t x = detail::mix64(h + i);
      v[i] = static_cast<double>(x >> 11) / 9007199254740992.0 * 2.0 - 1.0;
      norm_sq += v[i] * v[i];
    }
    if (norm_sq == 0.0) {
      v[0] = 1.0;
      return v;
    }
    double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x *= inv;
    return v;
  }

  std::shared_ptr<Transport> make_transport() const {
    MockEmbedder copy = *this;
    return std::make_shared<FnTransport>(
        [copy](const std::string& path, const std::string& body) -> std::string {
          if (path.find("/embeddings") == std::string::npos) {
            throw TransportError("mock embedder only serves /v1/embeddings, got " + path);
          }
          nlohmann::json parsed = nlohmann::json::parse(body);
          std::string input = parsed.at("input").get<std::string>();
          std::string model = parsed.value("model", "mock");
          return make_embedding_response_json(copy.vector_for(input), model);
        });
  }
};

}  // namespace venndi::llm
