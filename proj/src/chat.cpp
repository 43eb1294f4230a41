#include "spare/chat.hpp"

#include <cctype>

#include "spare/digest.hpp"

namespace spare {

Json chat_request_body(const ChatRequest& request) {
  Json body;
  body["model"] = request.model;
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    messages.push_back(Json{{"role", m.role}, {"content", m.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = request.decoding.temperature;
  body["max_tokens"] = request.decoding.max_tokens;
  body["n"] = request.decoding.n;
  body["seed"] = request.decoding.seed;
  return body;
}

std::string cache_key(const ChatRequest& request) {
  Json canonical = chat_request_body(request);
  canonical["endpoint"] = request.endpoint_id;
  return sha256_hex(canonical.dump());
}

long whitespace_tokens(const std::string& text) {
  long count = 0;
  bool in_token = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

long prompt_token_count(const std::vector<ChatMessage>& messages) {
  // 4 tokens of overhead per message approximates role/framing costs of
  // common chat templates; any fixed constant keeps the audit linear.
  constexpr long kPerMessageOverhead = 4;
  long total = 0;
  for (const auto& m : messages) {
    total += kPerMessageOverhead + whitespace_tokens(m.content);
  }
  return total;
}

}  // namespace spare
