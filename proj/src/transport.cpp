#include "spare/transport.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>

#include "spare/errors.hpp"
#include "spare/mock_backend.hpp"

namespace spare {

namespace {
std::atomic<long> g_http_instances{0};
}

HttpTransport::HttpTransport(EndpointConfig config)
    : config_(std::move(config)) {
  g_http_instances.fetch_add(1, std::memory_order_relaxed);
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError({"endpoint '" + config_.id + "': env var " +
                         config_.api_key_env + " is not set"});
    }
    api_key_ = key;
  }
}

long HttpTransport::instances_created() {
  return g_http_instances.load(std::memory_order_relaxed);
}

Json HttpTransport::do_post(const std::string& path, const Json& body) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key_);
  }
  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) {
    throw BackendUnavailable("endpoint '" + config_.id + "': " +
                             httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw BackendUnavailable("endpoint '" + config_.id + "': HTTP " +
                             std::to_string(result->status));
  }
  try {
    return Json::parse(result->body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedBackendReply("endpoint '" + config_.id +
                                "': non-JSON body: " + e.what());
  }
}

std::shared_ptr<Transport> make_transport(const EndpointConfig& config) {
  if (config.kind == "mock") return std::make_shared<MockTransport>(config);
  if (config.kind == "http") return std::make_shared<HttpTransport>(config);
  throw ConfigError({"endpoint '" + config.id + "': unknown kind '" +
                     config.kind + "'"});
}

}  // namespace spare
