#include "misbind/backend.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

#include "base64.hpp"
#include "misbind/hash.hpp"

namespace misbind {
namespace {

using nlohmann::json;

constexpr std::chrono::milliseconds kBackoffBase{100};

struct CapabilityName {
  Capability value;
  const char* name;
};

constexpr CapabilityName kCapabilities[] = {
    {Capability::GenerateText, "generate_text"},
    {Capability::ScoreTextSafety, "score_text_safety"},
    {Capability::GenerateImage, "generate_image"},
    {Capability::AnswerVqa, "answer_vqa"},
    {Capability::ScoreImageSafety, "score_image_safety"},
};

bool is_mock(const BackendDescriptor& backend) {
  return backend.endpoint.rfind("mock:", 0) == 0;
}

bool reply_format_is_chat(const BackendDescriptor& backend) {
  const json params = json::parse(backend.params_json, nullptr, false);
  return params.is_object() && params.value("reply_format", "bare") == "chat";
}

/// Judge backends carry their (configurable) system prompt in params.
std::string params_system_prompt(const BackendDescriptor& backend) {
  const json params = json::parse(backend.params_json, nullptr, false);
  return params.is_object() ? params.value("system_prompt", "") : "";
}

void require_capability(const BackendDescriptor& backend, Capability wanted) {
  if (backend.capability != wanted) {
    throw PreconditionError("backend '" + backend.id + "' has capability " +
                            to_string(backend.capability) + ", operation needs " +
                            to_string(wanted));
  }
}

/// Unwraps the reply payload: either the body itself ("bare") or the first
/// choice's message content of a chat-completions envelope.
std::string reply_payload(const std::string& body, bool chat_envelope) {
  if (!chat_envelope) {
    return body;
  }
  const json envelope = json::parse(body, nullptr, false);
  if (envelope.is_discarded() || !envelope.contains("choices") ||
      !envelope["choices"].is_array() || envelope["choices"].empty()) {
    throw JudgeFormatError("chat envelope missing choices array");
  }
  const json& message = envelope["choices"][0].value("message", json::object());
  if (!message.contains("content") || !message["content"].is_string()) {
    throw JudgeFormatError("chat envelope missing message content");
  }
  return message["content"].get<std::string>();
}

std::string content_field(const std::string& body, bool chat_envelope) {
  if (chat_envelope) {
    return reply_payload(body, true);
  }
  const json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("content")) {
    throw JudgeFormatError("reply missing 'content' field");
  }
  const json& content = parsed["content"];
  if (content.is_string()) {
    return content.get<std::string>();
  }
  if (content.is_number()) {
    return content.dump();
  }
  throw JudgeFormatError("reply 'content' is neither string nor number");
}

double parse_unit_interval(const std::string& text) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw JudgeFormatError("non-numeric answer: '" + text + "'");
  }
  // Trailing junk means the reply was not a plain number.
  for (std::size_t i = consumed; i < text.size(); ++i) {
    if (!std::isspace(static_cast<unsigned char>(text[i]))) {
      throw JudgeFormatError("non-numeric answer: '" + text + "'");
    }
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw JudgeFormatError("answer outside [0,1]: '" + text + "'");
  }
  return value;
}

}  // namespace

std::string to_string(Capability value) {
  for (const auto& entry : kCapabilities) {
    if (entry.value == value) {
      return entry.name;
    }
  }
  throw PreconditionError("unknown capability");
}

Capability capability_from_string(const std::string& name) {
  for (const auto& entry : kCapabilities) {
    if (name == entry.name) {
      return entry.value;
    }
  }
  throw PreconditionError("unknown capability: '" + name + "'");
}

std::string mock_canonical_input(const BackendDescriptor& backend,
                                 const WireRequest& request) {
  std::string categories;
  for (const auto& category : request.categories) {
    if (!categories.empty()) {
      categories.push_back(',');
    }
    categories.append(category);
  }
  return canonical_join({backend.id, request.op, request.system_prompt,
                         request.user_payload, std::to_string(request.seed),
                         request.image_b64, request.identity_b64, categories});
}

RawSafetyScore parse_safety_reply(const std::string& body, bool chat_envelope) {
  const std::string payload = reply_payload(body, chat_envelope);
  const json parsed = json::parse(payload, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw JudgeFormatError("judge reply is not a JSON object");
  }
  if (!parsed.contains("score") || !parsed["score"].is_number_integer()) {
    throw JudgeFormatError("judge reply missing integer 'score'");
  }
  RawSafetyScore score;
  score.score = parsed["score"].get<int>();
  score.rationale = parsed.value("rationale", "");
  if (score.score < 0 || score.score > 100) {
    throw ValidationError("judge-reply", "score", "outside [0,100]: " +
                                                      std::to_string(score.score));
  }
  return score;
}

Gateway::Gateway(ImageStore* image_store, std::shared_ptr<Clock> clock,
                 JsonlLogger* logger)
    : image_store_(image_store),
      clock_(std::move(clock)),
      logger_(logger),
      mock_transport_(make_mock_transport()),
      http_transport_(make_http_transport()) {}

Transport& Gateway::transport_for(const BackendDescriptor& backend) {
  return is_mock(backend) ? *mock_transport_ : *http_transport_;
}

void Gateway::acquire_rate_slot(const BackendDescriptor& backend) {
  if (backend.rate_limit <= 0.0) {
    return;
  }
  const auto limit = static_cast<std::size_t>(backend.rate_limit);
  std::lock_guard lock(rate_mutex_);
  auto& window = recent_requests_[backend.id];
  const auto one_second = std::chrono::milliseconds(1000);
  auto now = clock_->now();
  while (window.size() >= limit) {
    while (!window.empty() && now - window.front() >= one_second) {
      window.pop_front();
    }
    if (window.size() < limit) {
      break;
    }
    const auto wait =
        std::chrono::duration_cast<std::chrono::milliseconds>(window.front() + one_second - now);
    clock_->sleep_for(std::max(wait, std::chrono::milliseconds(1)));
    now = clock_->now();
  }
  window.push_back(now);
}

std::string Gateway::transact(const BackendDescriptor& backend,
                              const WireRequest& request) {
  Transport& transport = transport_for(backend);
  const int max_attempts = std::max(backend.max_retries, 0) + 1;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    acquire_rate_slot(backend);
    if (logger_ != nullptr) {
      logger_->info("backend_attempt", {{"backend", backend.id},
                                        {"op", request.op},
                                        {"attempt", std::to_string(attempt)}});
    }
    try {
      const WireReply reply = transport.send(backend, request);
      if (reply.status >= 200 && reply.status < 300) {
        return reply.body;
      }
      if (reply.status == 429 || reply.status >= 500) {
        last_error = "status " + std::to_string(reply.status);
      } else if (reply.status >= 400) {
        throw RequestRejectedError(reply.status, reply.body);
      } else {
        last_error = "unexpected status " + std::to_string(reply.status);
      }
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (attempt < max_attempts) {
      const auto backoff = kBackoffBase * (1 << (attempt - 1));
      clock_->sleep_for(std::chrono::duration_cast<std::chrono::milliseconds>(backoff));
    }
  }
  if (logger_ != nullptr) {
    logger_->warn("backend_exhausted", {{"backend", backend.id},
                                        {"op", request.op},
                                        {"attempts", std::to_string(max_attempts)}});
  }
  throw BackendUnavailableError(backend.id, max_attempts, last_error);
}

std::string Gateway::generate_text(const BackendDescriptor& backend,
                                   const std::string& system_prompt,
                                   const std::string& user_payload,
                                   std::uint64_t decode_seed) {
  require_capability(backend, Capability::GenerateText);
  WireRequest request;
  request.op = "generate_text";
  request.system_prompt = system_prompt;
  request.user_payload = user_payload;
  request.seed = decode_seed;
  const std::string body = transact(backend, request);
  return content_field(body, reply_format_is_chat(backend));
}

RawSafetyScore Gateway::score_text_safety(const BackendDescriptor& backend,
                                          const std::string& prompt_text) {
  require_capability(backend, Capability::ScoreTextSafety);
  WireRequest request;
  request.op = "score_text_safety";
  request.system_prompt = params_system_prompt(backend);
  request.user_payload = prompt_text;
  const std::string body = transact(backend, request);
  return parse_safety_reply(body, reply_format_is_chat(backend));
}

ImageResult Gateway::generate_image(const BackendDescriptor& backend,
                                    const std::string& prompt_text,
                                    const std::optional<std::string>& identity_ref,
                                    std::uint64_t seed) {
  require_capability(backend, Capability::GenerateImage);
  if (backend.identity_preserving && !identity_ref.has_value()) {
    throw PreconditionError("backend '" + backend.id +
                            "' is identity-preserving and requires identity_ref");
  }
  if (!backend.identity_preserving && identity_ref.has_value()) {
    throw PreconditionError("backend '" + backend.id +
                            "' does not accept an identity_ref");
  }
  if (image_store_ == nullptr) {
    throw PreconditionError("gateway has no image store configured");
  }
  WireRequest request;
  request.op = "generate_image";
  request.user_payload = prompt_text;
  request.seed = seed;
  if (identity_ref) {
    request.identity_b64 = detail::base64_encode(*identity_ref);
  }
  const std::string body = transact(backend, request);
  const json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw JudgeFormatError("image reply is not a JSON object");
  }
  ImageResult result;
  if (parsed.value("refused", false)) {
    result.outcome = ImageOutcome::Refused;
    if (logger_ != nullptr) {
      logger_->info("image_refused", {{"backend", backend.id},
                                      {"seed", std::to_string(seed)}});
    }
    return result;
  }
  if (!parsed.contains("image_b64") || !parsed["image_b64"].is_string()) {
    throw JudgeFormatError("image reply missing 'image_b64'");
  }
  const std::string bytes = detail::base64_decode(parsed["image_b64"].get<std::string>());
  result.outcome = ImageOutcome::Generated;
  result.address = image_store_->put(bytes);
  if (logger_ != nullptr) {
    logger_->info("image_stored", {{"backend", backend.id},
                                   {"seed", std::to_string(seed)},
                                   {"sha256", result.address.sha256}});
  }
  return result;
}

double Gateway::answer_vqa(const BackendDescriptor& backend, const VqaQuery& query) {
  require_capability(backend, Capability::AnswerVqa);
  if (query.question.empty()) {
    throw PreconditionError("VQA question must be non-empty");
  }
  WireRequest request;
  request.op = "answer_vqa";
  request.system_prompt = params_system_prompt(backend);
  request.user_payload = query.question;
  if (image_store_ != nullptr && image_store_->contains(query.image)) {
    request.image_b64 = detail::base64_encode(image_store_->get(query.image));
  } else {
    // Mock backends key on the address alone; remote ones need the bytes.
    request.image_b64 = query.image.sha256;
  }
  const std::string body = transact(backend, request);
  const std::string answer = content_field(body, reply_format_is_chat(backend));
  if (query.expected_answer_space == AnswerSpace::YesNo) {
    std::string lowered;
    for (char c : answer) {
      lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (lowered.rfind("yes", 0) == 0) {
      return 1.0;
    }
    if (lowered.rfind("no", 0) == 0) {
      return 0.0;
    }
    throw JudgeFormatError("expected yes/no answer, got: '" + answer + "'");
  }
  return parse_unit_interval(answer);
}

RawSafetyScore Gateway::score_image_safety(const BackendDescriptor& backend,
                                           const ContentAddress& image_ref,
                                           const std::set<HarmType>& categories) {
  require_capability(backend, Capability::ScoreImageSafety);
  if (categories.empty()) {
    throw PreconditionError("categories must be non-empty");
  }
  WireRequest request;
  request.op = "score_image_safety";
  request.system_prompt = params_system_prompt(backend);
  if (image_store_ != nullptr && image_store_->contains(image_ref)) {
    request.image_b64 = detail::base64_encode(image_store_->get(image_ref));
  } else {
    request.image_b64 = image_ref.sha256;
  }
  for (const auto harm : categories) {
    request.categories.push_back(to_string(harm));
  }
  const std::string body = transact(backend, request);
  return parse_safety_reply(body, reply_format_is_chat(backend));
}

}  // namespace misbind
