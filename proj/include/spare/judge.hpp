#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spare/chat.hpp"
#include "spare/core.hpp"
#include "spare/gateway.hpp"

namespace spare {

// The grading system prompt: evaluation heuristics, the seven-key output
// schema, and the profile's error-category definitions.
struct SystemGuidelines {
  std::string profile;
  std::string text;
};

SystemGuidelines build_system_guidelines(const DatasetProfile& profile);

// The seven keys every evaluation object must carry, in wire order.
const std::vector<std::string>& evaluation_schema_keys();

struct ExemplarTags {
  bool final_answer_correct = false;
  std::string topic;
};

// One worked grading example: a rendered problem/candidate pair as the user
// turn and a gold evaluation as the assistant turn. Gold evaluations must
// parse and validate cleanly; load_exemplars enforces that.
struct Exemplar {
  std::string id;
  std::string user_text;
  std::string assistant_text;
  ExemplarTags tags;
  int candidate_steps = 0;
};

enum class BalancePolicy { balanced, none };

// Draws k exemplars reproducibly under seed, excluding the given ids.
// The balanced policy keeps correct/incorrect counts within one of each
// other and rotates across topics when tags allow. Throws InsufficientPool.
std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool,
                                       std::size_t k, std::uint64_t seed,
                                       const std::vector<std::string>& exclude,
                                       BalancePolicy policy);

// User-turn rendering with 1-based "[i]" indices under the QUESTION /
// REFERENCE ANSWER / STUDENT'S ANSWER headers. Newlines embedded in a
// sentence or step are escaped so each indexed entry stays on one line.
std::string render_problem(const Problem& problem, const Candidate& candidate);

// QUESTION section only; used for preference-pair prompts and PRM records.
std::string render_context(const Problem& problem);

// system turn, then a user/assistant pair per exemplar, then the target
// user turn. Judge decoding defaults to temperature 0.
ChatRequest build_evaluation_prompt(const SystemGuidelines& guidelines,
                                    const std::vector<Exemplar>& exemplars,
                                    const Problem& problem,
                                    const Candidate& candidate,
                                    const std::string& model = "",
                                    const ChatDecoding& decoding = {});

struct GenerationResult {
  std::vector<Candidate> candidates;
  int dropped = 0;  // empty or unsegmentable completions
};

// Samples n_samples solutions for a problem in one backend call, segments
// them, and extracts answers. Empty completions are dropped and counted.
GenerationResult sample_generations(Gateway& gateway, const Problem& problem,
                                    const DatasetProfile& profile,
                                    int n_samples, double temperature,
                                    std::uint64_t seed);

// Exemplar JSONL schema: structured problem + candidate + gold evaluation.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path,
                                     const DatasetProfile& profile);
Exemplar exemplar_from_json(const Json& j, const DatasetProfile& profile);

}  // namespace spare
