#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spare/jsonl.hpp"

namespace spare {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatDecoding {
  double temperature = 0.0;
  int max_tokens = 2048;
  int n = 1;
  std::uint64_t seed = 0;
};

struct ChatRequest {
  std::string endpoint_id;  // logical endpoint (generator/judge/scorer)
  std::string model;
  std::vector<ChatMessage> messages;
  ChatDecoding decoding;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    return *this;
  }
};

struct ChatResponse {
  std::vector<std::string> choices;
  TokenUsage usage;
};

// Wire body for the chat-completion endpoint (messages array + decoding
// params, response read from choices[].message.content and usage).
Json chat_request_body(const ChatRequest& request);

// Stable content digest over messages + decoding params + endpoint id.
// Identical requests share a cache slot and perform no backend call.
std::string cache_key(const ChatRequest& request);

// Tokenizer-agnostic counter used for usage accounting and the prompt-size
// audit: whitespace tokens plus a small fixed per-message overhead.
long whitespace_tokens(const std::string& text);
long prompt_token_count(const std::vector<ChatMessage>& messages);

}  // namespace spare
