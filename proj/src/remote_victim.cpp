#include <httplib.h>

#include <json.hpp>
#include <sstream>

#include "pivot/victim.hpp"

namespace pivot {

using nlohmann::json;

std::string make_request_body(std::span<const std::string> tokens) {
  return json{{"text", detokenize(tokens)}}.dump();
}

Response parse_label_response(std::string_view body, const std::string& label_field) {
  json reply;
  try {
    reply = json::parse(body);
  } catch (const json::parse_error& e) {
    throw MalformedResponse(std::string("victim reply is not JSON: ") + e.what());
  }
  if (!reply.is_object()) throw MalformedResponse("victim reply is not a JSON object");
  auto it = reply.find(label_field);
  if (it == reply.end()) throw MalformedResponse("victim reply lacks field '" + label_field + "'");
  if (it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) {
    throw MalformedResponse("victim reply field '" + label_field + "' is not an integer: " +
                            it->dump());
  }
  return it->get<Label>();
}

RemoteVictim::RemoteVictim(RemoteVictimConfig config) : config_(std::move(config)) {
  const std::string scheme = "http://";
  if (config_.endpoint.rfind(scheme, 0) != 0) {
    throw std::invalid_argument("remote victim endpoint must be an http:// URL: " +
                                config_.endpoint);
  }
  const auto slash = config_.endpoint.find('/', scheme.size());
  if (slash == std::string::npos) {
    base_ = config_.endpoint;
    path_ = "/";
  } else {
    base_ = config_.endpoint.substr(0, slash);
    path_ = config_.endpoint.substr(slash);
  }
  if (base_.size() == scheme.size()) throw std::invalid_argument("remote victim endpoint has no host");
  if (config_.retries < 0) throw std::invalid_argument("retries must be >= 0");
  if (config_.timeout_ms <= 0) throw std::invalid_argument("timeout must be positive");
}

Response RemoteVictim::classify(std::span<const std::string> tokens) {
  httplib::Client client(base_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!config_.bearer_token.empty()) client.set_bearer_token_auth(config_.bearer_token);

  const std::string body = make_request_body(tokens);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    return parse_label_response(res->body, config_.label_field);
  }
  std::ostringstream os;
  os << "remote victim " << config_.endpoint << " failed after " << (config_.retries + 1)
     << " attempts: " << last_error;
  throw VictimError(os.str());
}

}  // namespace pivot
