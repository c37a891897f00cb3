#pragma once

// HTTP transport over cpp-httplib. Kept out of llm.hpp so tests and anything
// replay-only never pay for compiling the HTTP stack. The API credential is
// read from an environment variable at call time and never stored.

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "venndi/error.hpp"
#include "venndi/llm.hpp"

namespace venndi::llm {

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url,
                         std::string credential_env = "OPENAI_API_KEY")
      : base_url_(std::move(base_url)), credential_env_(std::move(credential_env)) {}

  std::string post(const std::string& path, const std::string& body) override {
    // one client per call keeps this safe under concurrent use
    httplib::Client client(base_url_);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(credential_env_.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      throw TransportError("no response from " + base_url_ + path + ": " +
                           httplib::to_string(result.error()));
    }
    if (result->status == 429) {
      throw RateLimitError("HTTP 429 from " + path);
    }
    if (result->status >= 500) {
      throw ServerError("HTTP " + std::to_string(result->status) + " from " + path);
    }
    if (result->status < 200 || result->status >= 300) {
      throw TransportError("HTTP " + std::to_string(result->status) + " from " + path +
                           ": " + result->body.substr(0, 200));
    }
    return result->body;
  }

 private:
  std::string base_url_;
  std::string credential_env_;
};

}  // namespace venndi::llm
