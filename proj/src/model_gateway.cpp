#include "ctharness/model_gateway.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::gateway {

using nlohmann::json;
using prompt::Dialect;

// --- profiles ------------------------------------------------------------------------

double default_temperature(Dialect dialect) { return dialect == Dialect::gpt ? 0.0 : 0.01; }

ModelProfile make_profile(std::string name, std::string model, Dialect dialect) {
  ModelProfile p;
  p.name = std::move(name);
  p.model = std::move(model);
  p.dialect = dialect;
  p.temperature = default_temperature(dialect);
  return p;
}

ModelProfile preset_profile(std::string_view name) {
  if (name == "gpt35") return make_profile("gpt35", "gpt-3.5-turbo-0613", Dialect::gpt);
  if (name == "gpt4") return make_profile("gpt4", "gpt-4-0613", Dialect::gpt);
  if (name == "llama2") {
    // Any OpenAI-compatible server hosting the chat model, local by default.
    auto p = make_profile("llama2", "meta-llama/Llama-2-70b-chat-hf", Dialect::llama);
    p.endpoint = "http://localhost:8000/v1/chat/completions";
    p.api_key_env = "LLAMA_API_KEY";
    return p;
  }
  throw ConfigError("unknown model profile '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"gpt35", "gpt4", "llama2"}; }

bool supports_logit_bias(Dialect dialect) { return dialect == Dialect::gpt; }

ModelProfile constrained_single_token(const ModelProfile& profile, const std::set<TokenId>& allowed) {
  if (allowed.empty()) throw ValidationError("constrained decoding needs at least one allowed token");
  if (!supports_logit_bias(profile.dialect)) {
    throw UnsupportedCapabilityError("dialect '" + std::string(prompt::to_string(profile.dialect)) +
                                     "' does not support logit bias");
  }
  ModelProfile out = profile;
  out.max_output_tokens = 1;
  for (TokenId id : allowed) out.logit_bias[id] = kForcedTokenBias;
  return out;
}

std::optional<TokenId> known_token_id(std::string_view token) {
  // '0'..'9' are ids 15..24 in both the GPT-2/3 and cl100k vocabularies.
  if (token.size() == 1 && token[0] >= '0' && token[0] <= '9') return 15 + (token[0] - '0');
  return std::nullopt;
}

ModelProfile constrained_single_token(const ModelProfile& profile, const std::set<std::string>& allowed) {
  std::set<TokenId> ids;
  for (const auto& t : allowed) {
    auto id = known_token_id(t);
    if (!id) throw ValidationError("no known token id for '" + t + "'; pass token ids directly");
    ids.insert(*id);
  }
  return constrained_single_token(profile, ids);
}

json to_json(const ModelProfile& p) {
  json bias = json::object();
  for (const auto& [id, b] : p.logit_bias) bias[std::to_string(id)] = b;
  return json{{"name", p.name},
              {"model", p.model},
              {"endpoint", p.endpoint},
              {"dialect", std::string(prompt::to_string(p.dialect))},
              {"temperature", p.temperature},
              {"max_output_tokens", p.max_output_tokens ? json(*p.max_output_tokens) : json(nullptr)},
              {"logit_bias", bias},
              {"request_timeout_ms", p.request_timeout.count()},
              {"max_in_flight", p.max_in_flight},
              {"api_key_env", p.api_key_env}};
}

ModelProfile profile_from_json(const json& j) {
  ModelProfile p;
  p.name = j.at("name").get<std::string>();
  p.model = j.at("model").get<std::string>();
  p.endpoint = j.at("endpoint").get<std::string>();
  p.dialect = prompt::parse_dialect(j.at("dialect").get<std::string>());
  p.temperature = j.at("temperature").get<double>();
  if (auto it = j.find("max_output_tokens"); it != j.end() && !it->is_null()) p.max_output_tokens = it->get<int>();
  if (auto it = j.find("logit_bias"); it != j.end()) {
    for (const auto& [k, v] : it->items()) p.logit_bias[std::stoi(k)] = v.get<double>();
  }
  p.request_timeout = Milliseconds(j.value("request_timeout_ms", 60'000));
  p.max_in_flight = j.value("max_in_flight", std::size_t{4});
  p.api_key_env = j.value("api_key_env", std::string("OPENAI_API_KEY"));
  return p;
}

// --- wire format -----------------------------------------------------------------------

std::string prompt_digest(const prompt::RenderedPrompt& p) {
  std::string bytes;
  bytes.reserve(p.system.size() + p.user.size() + 1);
  bytes += p.system;
  bytes.push_back('\0');
  bytes += p.user;
  return sha256_hex(bytes);
}

json chat_request(const prompt::RenderedPrompt& p, const ModelProfile& profile) {
  json body{{"model", profile.model},
            {"messages", json::array({{{"role", "system"}, {"content", p.system}},
                                      {{"role", "user"}, {"content", p.user}}})},
            {"temperature", profile.temperature}};
  if (profile.max_output_tokens) body["max_tokens"] = *profile.max_output_tokens;
  if (!profile.logit_bias.empty()) {
    json bias = json::object();
    for (const auto& [id, b] : profile.logit_bias) bias[std::to_string(id)] = b;
    body["logit_bias"] = bias;
  }
  return body;
}

TransportReply parse_chat_response(int status, const std::string& body) {
  TransportReply reply;
  reply.status = status;
  json j = json::parse(body, nullptr, false);
  if (status != 200) {
    reply.error = "HTTP " + std::to_string(status);
    if (!j.is_discarded() && j.contains("error")) {
      const auto& e = j["error"];
      reply.error += ": " + (e.is_object() ? e.value("message", e.dump()) : e.dump());
    }
    return reply;
  }
  if (j.is_discarded()) {
    reply.status = 502;
    reply.error = "response body is not JSON";
    return reply;
  }
  try {
    const auto& msg = j.at("choices").at(0).at("message");
    const auto& content = msg.at("content");
    reply.content = content.is_null() ? std::string() : content.get<std::string>();
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      reply.usage.prompt = u->value("prompt_tokens", std::size_t{0});
      reply.usage.completion = u->value("completion_tokens", std::size_t{0});
    }
  } catch (const json::exception& e) {
    reply.status = 502;
    reply.error = std::string("malformed chat response: ") + e.what();
  }
  return reply;
}

bool is_retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }
bool is_auth_failure(int status) { return status == 401 || status == 403; }

Milliseconds RetryPolicy::delay_before(int next_attempt, std::uint64_t jitter_draw) const {
  // next_attempt is 2 for the first retry.
  const double exp = std::ldexp(1.0, std::max(0, next_attempt - 2));
  const double unit = static_cast<double>(jitter_draw >> 11) * 0x1.0p-53;
  const double factor = 1.0 + jitter * (2.0 * unit - 1.0);
  return Milliseconds(static_cast<long long>(static_cast<double>(base_delay.count()) * exp * factor));
}

// --- replay --------------------------------------------------------------------------------

json to_json(const LedgerEntry& e) {
  const auto& r = e.response;
  return json{{"digest", e.digest},
              {"message_id", r.message_id},
              {"raw_output", r.raw_output},
              {"attempt", r.attempt},
              {"latency_ms", r.latency.count()},
              {"usage", {{"prompt", r.token_usage.prompt}, {"completion", r.token_usage.completion}}},
              {"error", r.error ? json(*r.error) : json(nullptr)}};
}

LedgerEntry ledger_entry_from_json(const json& j) {
  LedgerEntry e;
  e.digest = j.at("digest").get<std::string>();
  auto& r = e.response;
  r.message_id = j.value("message_id", std::string());
  r.raw_output = j.at("raw_output").get<std::string>();
  r.attempt = j.value("attempt", 1);
  r.latency = Milliseconds(j.value("latency_ms", 0LL));
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    r.token_usage.prompt = u->value("prompt", std::size_t{0});
    r.token_usage.completion = u->value("completion", std::size_t{0});
  }
  if (auto err = j.find("error"); err != j.end() && !err->is_null()) r.error = err->get<std::string>();
  return e;
}

Fixture load_fixture(const std::filesystem::path& path) {
  Fixture fixture;
  const auto lines = split_lines(read_file(path));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    LedgerEntry e;
    try {
      e = ledger_entry_from_json(json::parse(lines[n]));
    } catch (const std::exception& ex) {
      throw IngestError(path.string() + ": line " + std::to_string(n + 1) + ": " + ex.what());
    }
    if (e.response.error) continue;
    fixture.insert_or_assign(e.digest, std::move(e.response));
  }
  return fixture;
}

TransportReply ReplayTransport::send(const prompt::RenderedPrompt&, const std::string& digest, const ModelProfile&) {
  TransportReply reply;
  auto it = fixture_.find(digest);
  if (it == fixture_.end()) {
    reply.status = 404;
    reply.error = "replay miss for digest " + digest;
    return reply;
  }
  reply.content = it->second.raw_output;
  reply.usage = it->second.token_usage;
  return reply;
}

std::vector<ModelResponse> replay(const Fixture& fixture, const std::vector<prompt::RenderedPrompt>& prompts) {
  std::vector<ModelResponse> out;
  std::vector<std::string> missing;
  out.reserve(prompts.size());
  for (const auto& p : prompts) {
    const auto digest = prompt_digest(p);
    auto it = fixture.find(digest);
    if (it == fixture.end()) {
      missing.push_back(digest);
      continue;
    }
    ModelResponse r = it->second;
    r.message_id = p.message_id;
    r.attempt = 1;
    r.latency = Milliseconds(0);
    out.push_back(std::move(r));
  }
  if (!missing.empty()) throw ReplayMissError(std::move(missing));
  return out;
}

std::vector<ModelResponse> replay(const std::filesystem::path& fixture, const std::vector<prompt::RenderedPrompt>& prompts) {
  return replay(load_fixture(fixture), prompts);
}

// --- ledger -------------------------------------------------------------------------------

RunLedger::RunLedger(std::string run_id, ModelProfile profile, prompt::PromptSpec spec,
                     std::optional<std::filesystem::path> sink)
    : run_id_(std::move(run_id)), profile_(std::move(profile)), spec_(std::move(spec)) {
  if (sink) {
    if (sink->has_parent_path()) std::filesystem::create_directories(sink->parent_path());
    sink_.emplace(*sink, std::ios::binary | std::ios::app);
    if (!*sink_) throw IoError("cannot open ledger " + sink->string());
  }
}

void RunLedger::append(LedgerEntry entry) {
  std::lock_guard lock(mutex_);
  if (sink_) {
    *sink_ << to_json(entry).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    sink_->flush();
    if (!*sink_) throw IoError("ledger write failed for run " + run_id_);
  }
  entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> RunLedger::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t RunLedger::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

TokenUsage RunLedger::total_usage() const {
  std::lock_guard lock(mutex_);
  TokenUsage total;
  for (const auto& e : entries_) total += e.response.token_usage;
  return total;
}

// --- batch execution -------------------------------------------------------------------------

std::vector<ModelResponse> classify_batch(const std::vector<prompt::RenderedPrompt>& prompts,
                                          const ModelProfile& profile, RunLedger& ledger, Transport& transport,
                                          const RetryPolicy& retry) {
  if (prompts.empty()) return {};
  if (retry.max_attempts < 1) throw ConfigError("retry policy needs at least one attempt");
  const std::size_t workers = std::max<std::size_t>(1, std::min(profile.max_in_flight, prompts.size()));

  std::vector<ModelResponse> results(prompts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  auto sleep = retry.sleep ? retry.sleep : [](Milliseconds d) { std::this_thread::sleep_for(d); };

  auto worker = [&](std::size_t worker_index) {
    Rng jitter(mix_seed(0x6a09e667f3bcc908ULL, worker_index));
    try {
      while (!abort.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= prompts.size()) break;
        const auto& p = prompts[i];
        const auto digest = prompt_digest(p);
        ModelResponse response;
        response.message_id = p.message_id;
        const auto started = std::chrono::steady_clock::now();
        for (int attempt = 1;; ++attempt) {
          response.attempt = attempt;
          TransportReply reply;
          try {
            reply = transport.send(p, digest, profile);
          } catch (const std::exception& e) {
            reply.status = 0;
            reply.error = e.what();
          }
          if (reply.status == 200) {
            response.raw_output = std::move(reply.content);
            response.token_usage = reply.usage;
            break;
          }
          if (is_auth_failure(reply.status)) {
            abort.store(true);
            throw AuthError("authentication failed for model '" + profile.name + "': " + reply.error);
          }
          if (!is_retryable(reply.status) || attempt >= retry.max_attempts || abort.load()) {
            response.error = "after " + std::to_string(attempt) + " attempt(s): " + reply.error;
            break;
          }
          auto delay = retry.delay_before(attempt + 1, jitter.next());
          if (reply.retry_after && *reply.retry_after > delay) delay = *reply.retry_after;
          sleep(delay);
        }
        response.latency =
            std::chrono::duration_cast<Milliseconds>(std::chrono::steady_clock::now() - started);
        ledger.append(LedgerEntry{digest, response});
        results[i] = std::move(response);
      }
    } catch (...) {
      abort.store(true);
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker, w);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

// --- import ------------------------------------------------------------------------------------

std::vector<parsers::Prediction> import_predictions_jsonl(std::string_view contents,
                                                          const std::unordered_set<std::string>* known_ids) {
  std::vector<parsers::Prediction> out;
  std::unordered_set<std::string> seen;
  const auto lines = split_lines(contents);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const auto where = "line " + std::to_string(n + 1) + ": ";
    json j = json::parse(lines[n], nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ImportError(where + "malformed JSON object");
    if (!j.contains("message_id") || !j["message_id"].is_string()) throw ImportError(where + "missing `message_id`");
    parsers::Prediction p;
    p.message_id = j["message_id"].get<std::string>();
    p.status = parsers::ParseStatus::imported;
    if (known_ids && !known_ids->contains(p.message_id)) {
      throw ImportError(where + "unknown message_id '" + p.message_id + "'");
    }
    if (!seen.insert(p.message_id).second) throw ImportError(where + "duplicate message_id '" + p.message_id + "'");
    const bool has_label = j.contains("label") && !j["label"].is_null();
    const bool has_score = j.contains("score") && !j["score"].is_null();
    if (has_label == has_score) throw ImportError(where + "exactly one of `label` or `score` is required");
    if (has_score) {
      if (!j["score"].is_number()) throw ImportError(where + "`score` must be a number");
      const double s = j["score"].get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw RangeError(where + "score " + j["score"].dump() + " outside [0, 1]");
      p.verdict = s;
      p.raw_output = j["score"].dump();
    } else {
      const auto& l = j["label"];
      if (l.is_boolean()) p.verdict = l.get<bool>() ? corpus::Label::positive : corpus::Label::negative;
      else if (l.is_number_integer() && (l.get<int>() == 0 || l.get<int>() == 1))
        p.verdict = l.get<int>() == 1 ? corpus::Label::positive : corpus::Label::negative;
      else if (l.is_string()) {
        const auto s = to_lower_ascii(l.get<std::string>());
        if (s == "positive" || s == "1" || s == "yes") p.verdict = corpus::Label::positive;
        else if (s == "negative" || s == "0" || s == "no") p.verdict = corpus::Label::negative;
      }
      if (!p.verdict) throw ImportError(where + "unrecognized label " + l.dump());
      p.raw_output = l.is_string() ? l.get<std::string>() : l.dump();
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<parsers::Prediction> import_predictions(const std::filesystem::path& path,
                                                    const std::unordered_set<std::string>* known_ids) {
  return import_predictions_jsonl(read_file(path), known_ids);
}

}  // namespace ctharness::gateway
