#pragma once

#include "spare/transport.hpp"

namespace spare {

// Deterministic in-process backend. Serves the same wire shapes as a real
// endpoint (chat completions and step scores) without any socket I/O, so
// hermetic pipeline runs and tests are reproducible byte-for-byte.
//
// Roles:
//   generator  solutions with newline steps and a final-answer line;
//              occasionally emits a marker-less final or an empty choice
//              to exercise the degenerate-reply paths
//   judge      a fenced JSON evaluation array matching the grading schema,
//              with labels emitted as single-element lists
//   scorer     per-step logits in [-3, 3]
class MockTransport : public Transport {
 public:
  explicit MockTransport(EndpointConfig config) : config_(std::move(config)) {}

 protected:
  Json do_post(const std::string& path, const Json& body) override;

 private:
  Json chat_completion(const Json& body);
  Json step_scores(const Json& body);
  std::string generate_solution(const std::string& question,
                                std::uint64_t stream, int index,
                                double temperature);
  std::string grade_candidate(const std::string& rendered_problem);

  EndpointConfig config_;
};

}  // namespace spare
