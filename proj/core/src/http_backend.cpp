#ifndef _WIN32
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <string>

#include "misbind/backend.hpp"

// Remote backends speak a chat-completions-style JSON POST: a messages array
// with system/user roles, image inputs as base64 blocks inside the user turn,
// plus top-level "seed" and (for safety scoring) "categories".

namespace misbind {
namespace {

using nlohmann::json;

struct SplitEndpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path, defaults to "/"
};

SplitEndpoint split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must be a URI: '" + endpoint + "'");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {endpoint, "/"};
  }
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

json build_request_body(const WireRequest& request) {
  json body;
  json messages = json::array();
  if (!request.system_prompt.empty()) {
    json system;
    system["role"] = "system";
    system["content"] = request.system_prompt;
    messages.push_back(std::move(system));
  }
  json user;
  user["role"] = "user";
  if (request.image_b64.empty() && request.identity_b64.empty()) {
    user["content"] = request.user_payload;
  } else {
    json blocks = json::array();
    if (!request.user_payload.empty()) {
      json text_block;
      text_block["type"] = "text";
      text_block["text"] = request.user_payload;
      blocks.push_back(std::move(text_block));
    }
    if (!request.image_b64.empty()) {
      json image_block;
      image_block["type"] = "image";
      image_block["image_b64"] = request.image_b64;
      blocks.push_back(std::move(image_block));
    }
    if (!request.identity_b64.empty()) {
      json identity_block;
      identity_block["type"] = "identity_image";
      identity_block["image_b64"] = request.identity_b64;
      blocks.push_back(std::move(identity_block));
    }
    user["content"] = std::move(blocks);
  }
  messages.push_back(std::move(user));
  body["messages"] = std::move(messages);
  body["seed"] = request.seed;
  if (!request.categories.empty()) {
    body["categories"] = request.categories;
  }
  body["op"] = request.op;
  return body;
}

class HttpTransport final : public Transport {
 public:
  WireReply send(const BackendDescriptor& backend, const WireRequest& request) override {
    const SplitEndpoint endpoint = split_endpoint(backend.endpoint);
    httplib::Client client(endpoint.base);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(backend.timeout);
    client.set_connection_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);
    client.set_read_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);
    client.set_write_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);

    httplib::Headers headers;
    if (!backend.auth_env.empty()) {
      const char* credential = std::getenv(backend.auth_env.c_str());
      if (credential != nullptr && *credential != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + credential);
      }
    }

    const std::string body = build_request_body(request).dump();
    auto result = client.Post(endpoint.path, headers, body, "application/json");
    if (!result) {
      throw TransportError("request to " + backend.endpoint + " failed: " +
                           httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }
};

}  // namespace

std::unique_ptr<Transport> make_http_transport() {
  return std::make_unique<HttpTransport>();
}

}  // namespace misbind
