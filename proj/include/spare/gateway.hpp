#pragma once

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "spare/chat.hpp"
#include "spare/transport.hpp"

namespace spare {

// Bounds the number of in-flight backend calls across threads.
class ConcurrencyBudget {
 public:
  explicit ConcurrencyBudget(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  int limit_;
  int in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct GatewayStats {
  long transport_calls = 0;  // actual backend invocations (cache misses)
  long attempts = 0;         // including retried attempts
  long cache_hits = 0;
  TokenUsage usage;
};

// Backend gateway: content-addressed response cache, capped-exponential
// retry of transient failures, and a bounded in-flight budget. Identical
// requests are idempotent by cache key, so retries and reruns never
// duplicate backend work.
class Gateway {
 public:
  Gateway(std::shared_ptr<Transport> transport, EndpointConfig endpoint,
          std::filesystem::path cache_dir,  // empty disables the disk cache
          int retry_budget = 3,             // total attempts
          int backoff_ms = 500, std::shared_ptr<ConcurrencyBudget> budget = {});

  // Chat completion; returns verbatim choice texts and usage.
  ChatResponse complete(const ChatRequest& request);

  // Per-step scores from a scoring endpoint; logits are sigmoided, explicit
  // probabilities pass through.
  std::vector<double> step_scores(const std::vector<std::string>& steps,
                                  const std::string& marker);

  GatewayStats stats() const;
  const EndpointConfig& endpoint() const { return endpoint_; }
  long transport_calls() const { return transport_->calls(); }

 private:
  Json post_cached(const std::string& path, const Json& body,
                   const std::string& key);
  Json post_with_retry(const std::string& path, const Json& body);

  std::shared_ptr<Transport> transport_;
  EndpointConfig endpoint_;
  std::filesystem::path cache_dir_;
  int retry_budget_;
  int backoff_ms_;
  std::shared_ptr<ConcurrencyBudget> budget_;

  mutable std::mutex mutex_;
  std::unordered_map<std::string, Json> memory_cache_;
  GatewayStats stats_;
};

}  // namespace spare
