#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "ctharness/error.hpp"
#include "ctharness/model_gateway.hpp"

namespace ctharness::gateway {

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("endpoint is not an http(s) URL: " + url);
  return Endpoint{m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::optional<Milliseconds> parse_retry_after(const httplib::Result& res) {
  if (!res->has_header("Retry-After")) return std::nullopt;
  const auto value = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || seconds < 0) return std::nullopt;
  return Milliseconds(static_cast<long long>(seconds * 1000.0));
}

}  // namespace

TransportReply HttpTransport::send(const prompt::RenderedPrompt& prompt, const std::string&,
                                   const ModelProfile& profile) {
  const auto ep = split_endpoint(profile.endpoint);
  httplib::Client client(ep.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(profile.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(profile.request_timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    if (const char* key = std::getenv(profile.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto body = chat_request(prompt, profile).dump();
  auto res = client.Post(ep.path, headers, body, "application/json");
  if (!res) {
    TransportReply reply;
    reply.status = 0;
    reply.error = "network error: " + httplib::to_string(res.error());
    return reply;
  }
  auto reply = parse_chat_response(res->status, res->body);
  reply.retry_after = parse_retry_after(res);
  return reply;
}

}  // namespace ctharness::gateway
