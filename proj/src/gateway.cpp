#include "spare/gateway.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "spare/digest.hpp"
#include "spare/errors.hpp"

namespace fs = std::filesystem;

namespace spare {

Gateway::Gateway(std::shared_ptr<Transport> transport, EndpointConfig endpoint,
                 fs::path cache_dir, int retry_budget, int backoff_ms,
                 std::shared_ptr<ConcurrencyBudget> budget)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      cache_dir_(std::move(cache_dir)),
      retry_budget_(retry_budget < 1 ? 1 : retry_budget),
      backoff_ms_(backoff_ms),
      budget_(std::move(budget)) {
  if (!cache_dir_.empty()) fs::create_directories(cache_dir_);
}

Json Gateway::post_with_retry(const std::string& path, const Json& body) {
  for (int attempt = 1;; ++attempt) {
    {
      std::lock_guard lock(mutex_);
      ++stats_.attempts;
    }
    try {
      if (budget_) budget_->acquire();
      struct Release {
        ConcurrencyBudget* b;
        ~Release() {
          if (b) b->release();
        }
      } release{budget_.get()};
      Json response = transport_->post(path, body);
      {
        std::lock_guard lock(mutex_);
        ++stats_.transport_calls;
      }
      return response;
    } catch (const MalformedBackendReply&) {
      std::lock_guard lock(mutex_);
      ++stats_.transport_calls;
      throw;  // not transient; retrying cannot help
    } catch (const Error& e) {
      {
        std::lock_guard lock(mutex_);
        ++stats_.transport_calls;
      }
      if (attempt >= retry_budget_) {
        throw BackendUnavailable("endpoint '" + endpoint_.id + "' failed after " +
                                 std::to_string(attempt) +
                                 " attempts: " + e.what());
      }
      int delay = backoff_ms_ << std::min(attempt - 1, 4);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
  }
}

Json Gateway::post_cached(const std::string& path, const Json& body,
                          const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    auto it = memory_cache_.find(key);
    if (it != memory_cache_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
  }
  if (!cache_dir_.empty()) {
    fs::path file = cache_dir_ / (key + ".json");
    if (fs::exists(file)) {
      Json cached = Json::parse(read_text(file));
      std::lock_guard lock(mutex_);
      ++stats_.cache_hits;
      memory_cache_[key] = cached;
      return cached;
    }
  }

  Json response = post_with_retry(path, body);

  if (!cache_dir_.empty()) {
    write_text_atomic(cache_dir_ / (key + ".json"), response.dump());
  }
  std::lock_guard lock(mutex_);
  memory_cache_[key] = response;
  return response;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  Json body = chat_request_body(request);
  Json raw = post_cached("/v1/chat/completions", body, cache_key(request));

  ChatResponse response;
  try {
    for (const auto& choice : raw.at("choices")) {
      response.choices.push_back(
          choice.at("message").at("content").get<std::string>());
    }
    if (raw.contains("usage")) {
      response.usage.prompt_tokens = raw["usage"].value("prompt_tokens", 0L);
      response.usage.completion_tokens =
          raw["usage"].value("completion_tokens", 0L);
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedBackendReply("endpoint '" + endpoint_.id +
                                "': unexpected reply shape: " + e.what());
  }
  {
    std::lock_guard lock(mutex_);
    stats_.usage += response.usage;
  }
  return response;
}

std::vector<double> Gateway::step_scores(const std::vector<std::string>& steps,
                                         const std::string& marker) {
  Json body;
  body["model"] = endpoint_.model;
  body["steps"] = steps;
  body["marker"] = marker;
  Json keyed = body;
  keyed["endpoint"] = endpoint_.id;
  Json raw = post_cached("/v1/step_scores", body, sha256_hex(keyed.dump()));

  std::vector<double> probs;
  try {
    if (raw.contains("step_probs")) {
      probs = raw.at("step_probs").get<std::vector<double>>();
    } else {
      for (double logit : raw.at("step_logits").get<std::vector<double>>()) {
        probs.push_back(1.0 / (1.0 + std::exp(-logit)));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedBackendReply("endpoint '" + endpoint_.id +
                                "': unexpected score reply: " + e.what());
  }
  return probs;
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

}  // namespace spare
