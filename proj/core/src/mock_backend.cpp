#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include "base64.hpp"
#include "misbind/backend.hpp"
#include "misbind/hash.hpp"

// Offline backends. Every reply is a pure function of
// sha256_prefix64(mock_canonical_input(backend, request)) plus the
// descriptor's params, so runs against mocks are fully reproducible.

namespace misbind {
namespace {

using nlohmann::json;

std::string to_hex(std::uint64_t value, int digits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(static_cast<std::size_t>(digits), '0');
  for (int i = digits - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

constexpr std::array<std::string_view, 12> kAdjectives = {
    "amber", "cobalt", "ivory",  "scarlet", "sage",  "umber",
    "teal",  "maroon", "ochre",  "indigo",  "pearl", "slate"};

constexpr std::array<std::string_view, 12> kRoleNouns = {
    "courier",   "juggler",      "archivist", "lamplighter",
    "beekeeper", "cartographer", "violinist", "stonemason",
    "falconer",  "glassblower",  "printer",   "weaver"};

constexpr std::array<std::string_view, 12> kScenarioNouns = {
    "rooftop garden",  "tram depot",        "tide pool",
    "market arcade",   "observatory",       "greenhouse",
    "boathouse",       "amphitheater",      "clock tower",
    "botanical maze",  "funicular station", "mosaic courtyard"};

constexpr std::array<std::string_view, 12> kStateNouns = {
    "face paint",    "rain boots",   "paper crown",   "woolen cape",
    "chalk smudges", "festival ribbons", "circus stilts", "lantern garland",
    "velvet gloves", "mirrored visor",   "feathered hat", "patchwork coat"};

std::string synth_term_text(const std::string& target_component, std::uint64_t index) {
  const auto adjective = kAdjectives[(index >> 8) % kAdjectives.size()];
  std::string_view noun;
  if (target_component == "role") {
    noun = kRoleNouns[index % kRoleNouns.size()];
  } else if (target_component == "scenario") {
    noun = kScenarioNouns[index % kScenarioNouns.size()];
  } else {
    noun = kStateNouns[index % kStateNouns.size()];
  }
  return std::string(adjective) + " " + std::string(noun);
}

WireReply ok(const json& body) { return {200, body.dump()}; }

WireReply text_reply(const std::string& content) {
  json body;
  body["content"] = content;
  return ok(body);
}

bool contains(const std::string& haystack, const std::string& needle) {
  return !needle.empty() && haystack.find(needle) != std::string::npos;
}

/// Applies first-match "rules": [{"contains": tok, "score": n}] then falls
/// back to default_score.
int scored_by_rules(const json& params, const std::string& subject) {
  if (params.contains("rules") && params["rules"].is_array()) {
    for (const auto& rule : params["rules"]) {
      if (contains(subject, rule.value("contains", ""))) {
        return rule.value("score", 0);
      }
    }
  }
  return params.value("default_score", 100);
}

// Dispatches on the task payload's shape: expansion tasks carry seed_text,
// misbinding tasks carry a strategies list, annotation tasks a prompt_text.
WireReply handle_generate_text(const json& params, const WireRequest& request,
                               std::uint64_t h) {
  if (contains(request.user_payload, params.value("garbage_contains", ""))) {
    return {200, R"({"content": "]] this is not parseable json (("})"};
  }
  const json task = json::parse(request.user_payload, nullptr, false);
  const bool structured = !task.is_discarded() && task.is_object();
  if (structured && task.contains("seed_text") && task.contains("target_component")) {
    const auto target = task.value("target_component", "role");
    const auto count = task.value("count", 4);
    json terms = json::array();
    if (params.value("include_seed_duplicate", false)) {
      terms.push_back(task.value("seed_text", ""));
    }
    for (int i = 0; i < count; ++i) {
      terms.push_back(synth_term_text(
          target, h + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL));
    }
    return text_reply(terms.dump());
  }
  if (structured && task.contains("strategies")) {
    std::string strategy = params.value("force_strategy", "");
    if (strategy.empty()) {
      const auto& strategies = task.value("strategies", json::array());
      if (strategies.empty()) {
        return {400, "mock misbinding task has no strategies"};
      }
      strategy = strategies[h % strategies.size()].get<std::string>();
    }
    const auto term_text = task.value("term_text", "");
    const int attempt = task.value("attempt", 1);
    std::string prompt = "A studio portrait of a person; the backdrop mural depicts " +
                         term_text + " rendered in a gentle style (take " +
                         std::to_string(attempt) + ", code " + to_hex(h, 8) + ")";
    json reply;
    reply["strategy"] = strategy;
    reply["prompt"] = prompt;
    return text_reply(reply.dump());
  }
  if (structured && task.contains("prompt_text")) {
    const std::string prompt_text = task.value("prompt_text", "");
    const auto motif = kStateNouns[h % kStateNouns.size()];
    json annotations = json::array();
    json person;
    person["object_label"] = "person";
    person["existence_question"] = "Is a person present in the image?";
    person["attribute_questions"] =
        json::array({"Does the person match the description in: " + prompt_text + "?"});
    annotations.push_back(person);
    json detail_obj;
    detail_obj["object_label"] = std::string(motif);
    detail_obj["existence_question"] =
        "Does the image contain " + std::string(motif) + "?";
    detail_obj["attribute_questions"] = json::array(
        {"Is the " + std::string(motif) + " placed as the prompt describes?"});
    annotations.push_back(detail_obj);
    return text_reply(annotations.dump());
  }
  return text_reply("mock-" + to_hex(h, 16));
}

WireReply handle_score_text(const json& params, const WireRequest& request) {
  if (contains(request.user_payload, params.value("malformed_contains", ""))) {
    return {200, "][ malformed judge reply"};
  }
  json body;
  body["score"] = scored_by_rules(params, request.user_payload);
  return ok(body);
}

WireReply handle_generate_image(const json& params, const WireRequest& request,
                                const BackendDescriptor& backend,
                                std::uint64_t h) {
  if (contains(request.user_payload, params.value("refuse_contains", ""))) {
    json body;
    body["refused"] = true;
    body["reason"] = "mock safety system";
    return ok(body);
  }
  // Placeholder bytes embed the canonical inputs so that downstream image
  // judges can pattern-match on the originating prompt text.
  const std::string bytes = "MOCKIMG\x1f" + mock_canonical_input(backend, request) +
                            "\x1f" + to_hex(h, 16);
  json body;
  body["image_b64"] = detail::base64_encode(bytes);
  return ok(body);
}

WireReply handle_answer_vqa(const json& params, const WireRequest& request,
                            std::uint64_t h) {
  if (contains(request.user_payload, params.value("malformed_contains", ""))) {
    return text_reply("unclear");
  }
  const json table = params.value("table", json::object());
  json tabled;
  // Lookup order: "<sha256>|<question>" for store-backed bytes, the raw
  // image field joined with the question, then the question alone.
  if (!request.image_b64.empty()) {
    const std::string decoded = detail::base64_decode(request.image_b64);
    const std::string by_sha = sha256_hex(decoded) + "|" + request.user_payload;
    if (table.contains(by_sha)) {
      tabled = table[by_sha];
    }
    const std::string by_raw = request.image_b64 + "|" + request.user_payload;
    if (tabled.is_null() && table.contains(by_raw)) {
      tabled = table[by_raw];
    }
  }
  if (tabled.is_null() && table.contains(request.user_payload)) {
    tabled = table[request.user_payload];
  }
  if (!tabled.is_null()) {
    if (tabled.is_string()) {
      return text_reply(tabled.get<std::string>());
    }
    const double value = tabled.get<double>();
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return text_reply(buffer);
  }
  const bool yes_no_shape =
      request.user_payload.rfind("Is ", 0) == 0 ||
      request.user_payload.rfind("Does ", 0) == 0 ||
      request.user_payload.rfind("Are ", 0) == 0;
  if (yes_no_shape) {
    const double yes_rate = params.value("yes_rate", 0.85);
    return text_reply((h % 100) < static_cast<std::uint64_t>(yes_rate * 100) ? "yes"
                                                                             : "no");
  }
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%.3f",
                static_cast<double>((h >> 8) % 1001) / 1000.0);
  return text_reply(buffer);
}

WireReply handle_score_image(const json& params, const WireRequest& request) {
  const std::string decoded = detail::base64_decode(request.image_b64);
  if (contains(decoded, params.value("malformed_contains", ""))) {
    return {200, "][ malformed judge reply"};
  }
  json body;
  body["score"] = scored_by_rules(params, decoded);
  return ok(body);
}

class MockTransport final : public Transport {
 public:
  WireReply send(const BackendDescriptor& backend, const WireRequest& request) override {
    json params = json::parse(backend.params_json, nullptr, false);
    if (!params.is_object()) {
      params = json::object();
    }
    if (params.value("unreachable", false)) {
      throw TransportError("mock endpoint unreachable: " + backend.endpoint);
    }
    if (params.contains("reject_status")) {
      return {params.value("reject_status", 400), params.value("reject_body", "")};
    }
    const std::uint64_t h = sha256_prefix64(mock_canonical_input(backend, request));
    if (request.op == "generate_text") {
      return handle_generate_text(params, request, h);
    }
    if (request.op == "score_text_safety") {
      return handle_score_text(params, request);
    }
    if (request.op == "generate_image") {
      return handle_generate_image(params, request, backend, h);
    }
    if (request.op == "answer_vqa") {
      return handle_answer_vqa(params, request, h);
    }
    if (request.op == "score_image_safety") {
      return handle_score_image(params, request);
    }
    return {400, "mock transport: unknown op '" + request.op + "'"};
  }
};

}  // namespace

std::unique_ptr<Transport> make_mock_transport() {
  return std::make_unique<MockTransport>();
}

}  // namespace misbind
