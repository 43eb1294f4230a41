#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "spare/jsonl.hpp"

namespace spare {

struct EndpointConfig {
  std::string id;             // generator | judge | scorer | orm_scorer
  std::string kind = "mock";  // mock | http
  std::string model;
  // http only
  std::string base_url;
  std::string api_key_env;
  // mock only
  std::string mock_role;  // generator | judge | scorer
  std::uint64_t mock_seed = 0;
};

// A backend connection. post() counts invocations; subclasses implement
// do_post and throw BackendUnavailable on transient failure.
class Transport {
 public:
  virtual ~Transport() = default;

  Json post(const std::string& path, const Json& body) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_post(path, body);
  }

  long calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual Json do_post(const std::string& path, const Json& body) = 0;

 private:
  std::atomic<long> calls_{0};
};

// Chat-completion HTTP client (bearer auth, JSON bodies). Constructed only
// for kind == "http" endpoints; hermetic runs never instantiate it.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(EndpointConfig config);

  static long instances_created();

 protected:
  Json do_post(const std::string& path, const Json& body) override;

 private:
  EndpointConfig config_;
  std::string api_key_;
};

std::shared_ptr<Transport> make_transport(const EndpointConfig& config);

}  // namespace spare
