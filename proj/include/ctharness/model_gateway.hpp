#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ctharness/parsers.hpp"
#include "ctharness/prompt_kit.hpp"

namespace ctharness::gateway {

using Milliseconds = std::chrono::milliseconds;
using TokenId = int;

struct ModelProfile {
  std::string name;
  std::string model;  // provider-side model identifier
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  prompt::Dialect dialect = prompt::Dialect::gpt;
  double temperature = 0.0;
  std::optional<int> max_output_tokens;
  std::map<TokenId, double> logit_bias;
  Milliseconds request_timeout{60'000};
  std::size_t max_in_flight = 4;
  std::string api_key_env = "OPENAI_API_KEY";

  bool operator==(const ModelProfile&) const = default;
};

// 0 for gpt, 0.01 for llama.
double default_temperature(prompt::Dialect dialect);
ModelProfile make_profile(std::string name, std::string model, prompt::Dialect dialect);

// gpt35, gpt4, llama2
ModelProfile preset_profile(std::string_view name);
std::vector<std::string> preset_names();

bool supports_logit_bias(prompt::Dialect dialect);

inline constexpr double kForcedTokenBias = 100.0;

// max_output_tokens = 1 and bias +100 on each allowed id. Idempotent.
ModelProfile constrained_single_token(const ModelProfile& profile, const std::set<TokenId>& allowed);
// Resolves single-digit strings, whose ids coincide across the GPT byte-pair vocabularies.
ModelProfile constrained_single_token(const ModelProfile& profile, const std::set<std::string>& allowed);
std::optional<TokenId> known_token_id(std::string_view token);

nlohmann::json to_json(const ModelProfile& p);
ModelProfile profile_from_json(const nlohmann::json& j);

// --- exchanges ----------------------------------------------------------------------

struct TokenUsage {
  std::size_t prompt = 0;
  std::size_t completion = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    prompt += o.prompt;
    completion += o.completion;
    return *this;
  }
  bool operator==(const TokenUsage&) const = default;
};

struct ModelResponse {
  std::string message_id;
  std::string raw_output;  // verbatim, whitespace included
  Milliseconds latency{0};
  TokenUsage token_usage;
  int attempt = 1;
  std::optional<std::string> error;  // set when every attempt failed
};

// 256-bit hex digest over the system and user text.
std::string prompt_digest(const prompt::RenderedPrompt& p);

// OpenAI-compatible chat-completion request body.
nlohmann::json chat_request(const prompt::RenderedPrompt& p, const ModelProfile& profile);

struct TransportReply {
  int status = 200;  // HTTP status; 0 for a network-level failure
  std::string content;
  TokenUsage usage;
  std::string error;
  std::optional<Milliseconds> retry_after;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const prompt::RenderedPrompt& prompt, const std::string& digest,
                              const ModelProfile& profile) = 0;
};

// Parses a chat-completion response body into content and usage.
TransportReply parse_chat_response(int status, const std::string& body);

class HttpTransport : public Transport {
 public:
  HttpTransport() = default;
  TransportReply send(const prompt::RenderedPrompt& prompt, const std::string& digest,
                      const ModelProfile& profile) override;
};

using Fixture = std::unordered_map<std::string, ModelResponse>;

// Loads digest -> recorded response from ledger-format JSONL. Entries that
// recorded a transport error are skipped.
Fixture load_fixture(const std::filesystem::path& path);

class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(Fixture fixture) : fixture_(std::move(fixture)) {}
  TransportReply send(const prompt::RenderedPrompt& prompt, const std::string& digest,
                      const ModelProfile& profile) override;
  const Fixture& fixture() const { return fixture_; }

 private:
  Fixture fixture_;
};

struct RetryPolicy {
  int max_attempts = 5;
  Milliseconds base_delay{2'000};
  double jitter = 0.2;  // delay is scaled by a uniform factor in [1 - jitter, 1 + jitter]
  std::function<void(Milliseconds)> sleep;  // defaults to std::this_thread::sleep_for

  Milliseconds delay_before(int next_attempt, std::uint64_t jitter_draw) const;
};

bool is_retryable(int status);
bool is_auth_failure(int status);

// --- ledger -----------------------------------------------------------------------

struct LedgerEntry {
  std::string digest;
  ModelResponse response;
};

nlohmann::json to_json(const LedgerEntry& e);
LedgerEntry ledger_entry_from_json(const nlohmann::json& j);

// Append-only exchange log. Appends are serialized; when a sink path is given
// each entry is written and flushed as one JSONL line.
class RunLedger {
 public:
  RunLedger(std::string run_id, ModelProfile profile, prompt::PromptSpec spec,
            std::optional<std::filesystem::path> sink = std::nullopt);

  void append(LedgerEntry entry);
  std::vector<LedgerEntry> entries() const;
  std::size_t size() const;
  TokenUsage total_usage() const;

  const std::string& run_id() const { return run_id_; }
  const ModelProfile& profile() const { return profile_; }
  const prompt::PromptSpec& spec() const { return spec_; }

 private:
  std::string run_id_;
  ModelProfile profile_;
  prompt::PromptSpec spec_;
  mutable std::mutex mutex_;
  std::vector<LedgerEntry> entries_;
  std::optional<std::ofstream> sink_;
};

// One response per prompt, in prompt order. At most profile.max_in_flight
// requests are outstanding. Retryable failures back off exponentially; an
// item that exhausts its attempts carries an error and the batch continues.
// Authentication failures abort the batch with AuthError.
std::vector<ModelResponse> classify_batch(const std::vector<prompt::RenderedPrompt>& prompts,
                                          const ModelProfile& profile, RunLedger& ledger, Transport& transport,
                                          const RetryPolicy& retry = {});

// Recorded responses for `prompts`; throws ReplayMissError listing every unmatched digest.
std::vector<ModelResponse> replay(const std::filesystem::path& fixture,
                                  const std::vector<prompt::RenderedPrompt>& prompts);
std::vector<ModelResponse> replay(const Fixture& fixture, const std::vector<prompt::RenderedPrompt>& prompts);

// Predictions from an external model. Rows carry `message_id` and either
// `label` or `score`. When `known_ids` is given every id must be in it.
std::vector<parsers::Prediction> import_predictions(const std::filesystem::path& path,
                                                    const std::unordered_set<std::string>* known_ids = nullptr);
std::vector<parsers::Prediction> import_predictions_jsonl(std::string_view contents,
                                                          const std::unordered_set<std::string>* known_ids = nullptr);

}  // namespace ctharness::gateway
