#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "misbind/clock.hpp"
#include "misbind/errors.hpp"
#include "misbind/image_store.hpp"
#include "misbind/log.hpp"
#include "misbind/model.hpp"

namespace misbind {

enum class Capability {
  GenerateText,
  ScoreTextSafety,
  GenerateImage,
  AnswerVqa,
  ScoreImageSafety,
};

std::string to_string(Capability value);
Capability capability_from_string(const std::string& name);

/// One remote (or mock) capability endpoint. A descriptor serves exactly one
/// capability; `endpoint` starting with "mock:" selects the offline backend.
struct BackendDescriptor {
  std::string id;
  Capability capability = Capability::GenerateText;
  std::string endpoint;
  std::string auth_env;  // env var holding the credential, empty = none
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;      // transport retries; total attempts <= max_retries + 1
  double rate_limit = 0.0;  // max requests per sliding second, 0 = unlimited
  bool identity_preserving = false;
  std::string params_json = "{}";  // backend-kind specific options
};

/// Judge output on the 0-100 protocol; a lower score means higher risk.
struct RawSafetyScore {
  int score = 0;  // in [0,100], never clamped — out of range is an error
  std::string rationale;
};

enum class AnswerSpace { YesNo, FreeText };

struct VqaQuery {
  ContentAddress image;
  std::string question;
  AnswerSpace expected_answer_space = AnswerSpace::YesNo;
};

enum class ImageOutcome { Generated, Refused };

/// Result of an image generation call. A backend refusal (its own safety
/// system blocking) is a first-class outcome, not an error.
struct ImageResult {
  ImageOutcome outcome = ImageOutcome::Generated;
  ContentAddress address;  // empty when refused
};

// ---------------------------------------------------------------------------
// Transport layer
// ---------------------------------------------------------------------------

/// Connection-level failure; always retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

struct WireRequest {
  std::string op;
  std::string system_prompt;
  std::string user_payload;
  std::uint64_t seed = 0;
  std::string image_b64;
  std::string identity_b64;
  std::vector<std::string> categories;
};

struct WireReply {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual WireReply send(const BackendDescriptor& backend, const WireRequest& request) = 0;
};

/// Canonical pre-image hashed by mock backends: the backend id, op name,
/// prompts, seed, payload blocks and categories joined with 0x1f. Mock
/// replies are pure functions of sha256_prefix64 of this string.
std::string mock_canonical_input(const BackendDescriptor& backend,
                                 const WireRequest& request);

std::unique_ptr<Transport> make_mock_transport();
std::unique_ptr<Transport> make_http_transport();

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Uniform client for the five capabilities. Shareable across threads;
/// enforces capability gating before any I/O, per-descriptor rate limits,
/// and bounded retry with exponential backoff on transient failures.
class Gateway {
 public:
  Gateway(ImageStore* image_store, std::shared_ptr<Clock> clock,
          JsonlLogger* logger = nullptr);

  std::string generate_text(const BackendDescriptor& backend,
                            const std::string& system_prompt,
                            const std::string& user_payload,
                            std::uint64_t decode_seed);

  RawSafetyScore score_text_safety(const BackendDescriptor& backend,
                                   const std::string& prompt_text);

  ImageResult generate_image(const BackendDescriptor& backend,
                             const std::string& prompt_text,
                             const std::optional<std::string>& identity_ref,
                             std::uint64_t seed);

  double answer_vqa(const BackendDescriptor& backend, const VqaQuery& query);

  RawSafetyScore score_image_safety(const BackendDescriptor& backend,
                                    const ContentAddress& image_ref,
                                    const std::set<HarmType>& categories);

  ImageStore* image_store() { return image_store_; }

 private:
  std::string transact(const BackendDescriptor& backend, const WireRequest& request);
  void acquire_rate_slot(const BackendDescriptor& backend);
  Transport& transport_for(const BackendDescriptor& backend);

  ImageStore* image_store_ = nullptr;
  std::shared_ptr<Clock> clock_;
  JsonlLogger* logger_ = nullptr;
  std::unique_ptr<Transport> mock_transport_;
  std::unique_ptr<Transport> http_transport_;
  std::mutex rate_mutex_;
  std::map<std::string, std::deque<Clock::TimePoint>> recent_requests_;
};

/// Parses a judge reply body into a raw score. The body must be a JSON
/// object with a top-level integer "score" (optionally wrapped in a
/// chat-completions envelope when the backend declares reply_format "chat").
RawSafetyScore parse_safety_reply(const std::string& body, bool chat_envelope);

}  // namespace misbind
