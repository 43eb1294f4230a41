#include "spare/mock_backend.hpp"

#include <string>
#include <vector>

#include "spare/chat.hpp"
#include "spare/errors.hpp"
#include "spare/rng.hpp"

namespace spare {

namespace {

// Counts "[k] " lines following a section header in a rendered problem.
int count_indexed_lines(const std::string& text, const std::string& header) {
  std::size_t pos = text.find(header);
  if (pos == std::string::npos) return 0;
  int count = 0;
  std::size_t line_start = text.find('\n', pos);
  while (line_start != std::string::npos) {
    ++line_start;
    std::size_t line_end = text.find('\n', line_start);
    std::string line = text.substr(
        line_start, line_end == std::string::npos ? std::string::npos
                                                  : line_end - line_start);
    if (line.empty()) break;  // blank line ends the section
    std::string expect = "[" + std::to_string(count + 1) + "] ";
    if (line.rfind(expect, 0) == 0) ++count;
    line_start = line_end;
  }
  return count;
}

std::string last_user_content(const Json& body) {
  const auto& messages = body.at("messages");
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->at("role").get<std::string>() == "user") {
      return it->at("content").get<std::string>();
    }
  }
  throw MalformedBackendReply("mock backend: request has no user message");
}

TokenUsage usage_for(const Json& body, const std::vector<std::string>& outs) {
  TokenUsage usage;
  for (const auto& m : body.at("messages")) {
    usage.prompt_tokens += 4 + whitespace_tokens(m.at("content").get<std::string>());
  }
  for (const auto& out : outs) usage.completion_tokens += whitespace_tokens(out);
  return usage;
}

}  // namespace

Json MockTransport::do_post(const std::string& path, const Json& body) {
  if (path == "/v1/chat/completions") return chat_completion(body);
  if (path == "/v1/step_scores") return step_scores(body);
  throw BackendUnavailable("mock backend: unknown path " + path);
}

Json MockTransport::chat_completion(const Json& body) {
  int n = body.value("n", 1);
  double temperature = body.value("temperature", 0.0);
  std::uint64_t request_seed = body.value("seed", std::uint64_t{0});
  std::string user = last_user_content(body);

  std::vector<std::string> outs;
  if (config_.mock_role == "judge") {
    outs.push_back(grade_candidate(user));
  } else {
    std::uint64_t stream = config_.mock_seed ^ request_seed;
    for (int i = 0; i < n; ++i) {
      outs.push_back(generate_solution(user, stream, i, temperature));
    }
  }

  TokenUsage usage = usage_for(body, outs);
  Json choices = Json::array();
  for (std::size_t i = 0; i < outs.size(); ++i) {
    choices.push_back(Json{{"index", i},
                           {"message", {{"role", "assistant"}, {"content", outs[i]}}},
                           {"finish_reason", "stop"}});
  }
  Json response;
  response["model"] = config_.model.empty() ? "mock" : config_.model;
  response["choices"] = std::move(choices);
  response["usage"] = {{"prompt_tokens", usage.prompt_tokens},
                       {"completion_tokens", usage.completion_tokens}};
  return response;
}

std::string MockTransport::generate_solution(const std::string& question,
                                             std::uint64_t stream, int index,
                                             double temperature) {
  // Greedy decoding collapses every sample onto one stream.
  std::string salt = temperature == 0.0 ? std::string("#greedy")
                                        : "#" + std::to_string(index);
  SplitMix64 rng(mix_seed(stream, question + salt));

  std::uint64_t shape = rng.next();
  if (temperature > 0.0 && shape % 32 == 0) return "";  // degenerate reply

  int steps = 2 + static_cast<int>(shape % 3);
  std::string text;
  for (int k = 1; k <= steps; ++k) {
    std::uint64_t v = rng.next();
    text += "Step " + std::to_string(k) + ": combining quantity " +
            std::to_string(1 + v % 7) + " with quantity " +
            std::to_string(1 + (v >> 8) % 9) + " gives " +
            std::to_string(1 + (v >> 16) % 50) + ".\n";
  }
  if (temperature > 0.0 && shape % 16 == 1) {
    text += "So the computation is finished.";  // marker-less final
  } else {
    text += "Hence, the answer is " + std::to_string(1 + (shape >> 40) % 4) + ".";
  }
  return text;
}

std::string MockTransport::grade_candidate(const std::string& rendered) {
  int s = count_indexed_lines(rendered, "QUESTION:");
  int m = count_indexed_lines(rendered, "REFERENCE ANSWER:");
  int n = count_indexed_lines(rendered, "STUDENT'S ANSWER:");
  if (n == 0 || m == 0 || s == 0) {
    throw MalformedBackendReply("mock judge: cannot locate indexed sections");
  }

  Json evals = Json::array();
  for (int i = 1; i <= n; ++i) {
    std::uint64_t h =
        mix_seed(config_.mock_seed, rendered + "|step=" + std::to_string(i));
    bool correct = h % 100 < 65;
    int ref = 1 + static_cast<int>((h >> 7) % static_cast<std::uint64_t>(m));

    Json e;
    e["student_step"] = i;
    e["reasoning"] =
        std::string("Step [") + std::to_string(i) + "] " +
        (correct ? "is consistent with" : "conflicts with") +
        " reference step [" + std::to_string(ref) + "].";
    if ((h >> 16) % 3 == 0) {
      e["question_sentences"] =
          Json::array({1 + static_cast<int>((h >> 24) % static_cast<std::uint64_t>(s))});
    } else {
      e["question_sentences"] = Json::array();
    }
    if (i >= 2 && (h >> 32) % 4 == 0) {
      e["student_combining_steps"] = Json::array({i - 1});
    } else {
      e["student_combining_steps"] = Json::array();
    }
    e["matching_reference_steps"] = Json::array({ref});
    // NO STEP MATCH belongs to every profile's category set.
    e["error_category"] =
        correct ? Json::array() : Json::array({"NO STEP MATCH"});
    e["label"] = Json::array({correct ? "CORRECT" : "INCORRECT"});
    evals.push_back(std::move(e));
  }
  return "```json\n" + evals.dump(2) + "\n```";
}

Json MockTransport::step_scores(const Json& body) {
  const auto& steps = body.at("steps");
  Json logits = Json::array();
  for (const auto& step : steps) {
    std::uint64_t h = mix_seed(config_.mock_seed, step.get<std::string>());
    double logit = (SplitMix64(h).unit() - 0.5) * 6.0;  // [-3, 3)
    logits.push_back(logit);
  }
  return Json{{"model", config_.model.empty() ? "mock" : config_.model},
              {"step_logits", std::move(logits)}};
}

}  // namespace spare
