#include "spare/judge.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "spare/annotate.hpp"
#include "spare/errors.hpp"
#include "spare/rng.hpp"

namespace spare {

const std::vector<std::string>& evaluation_schema_keys() {
  static const std::vector<std::string> keys = {
      "student_step",           "reasoning",
      "question_sentences",     "student_combining_steps",
      "matching_reference_steps", "error_category",
      "label"};
  return keys;
}

SystemGuidelines build_system_guidelines(const DatasetProfile& profile) {
  std::string text;
  text +=
      "You are a teacher grading a student's assignment. You receive a "
      "QUESTION with numbered sentences, a ground-truth REFERENCE ANSWER "
      "with numbered steps, and a STUDENT'S ANSWER with numbered steps. "
      "Grade every step of the STUDENT'S ANSWER against the REFERENCE "
      "ANSWER and the QUESTION.\n\n";
  text +=
      "A step is CORRECT when it matches or is factually consistent with "
      "one or more reference steps, other student steps, or question "
      "sentences: check (a) that its topic, entities, variables and "
      "intended result are right, and (b) that its expressions, equations "
      "and numeric computations are right. A step that matches nothing or "
      "is factually wrong is INCORRECT. A single student step may need "
      "several reference steps or question sentences to judge, and several "
      "student steps may jointly correspond to one reference step.\n\n";
  text +=
      "Evaluate ALL the steps of the STUDENT'S ANSWER. Reply ONLY and ONLY "
      "in JSON format as a list of dictionaries with exactly these keys:\n\n";
  text +=
      "\"student_step\": the current step number of the STUDENT'S ANSWER.\n\n";
  text +=
      "\"reasoning\": why the current step, on its own or combined with "
      "other student steps, is correct or incorrect relative to the "
      "reference steps and question sentences it aligns with.\n\n";
  text +=
      "\"question_sentences\": list of QUESTION sentence numbers used to "
      "judge the step. Useful when the student's steps are fewer than the "
      "reference's or a step matches no reference step. Empty list when the "
      "step matches reference steps directly and entirely.\n\n";
  text +=
      "\"student_combining_steps\": list of previous student step numbers "
      "needed to judge the current step, because of restatements or "
      "transformations, or because together they make up one or more "
      "reference steps. Empty list when the step matches reference steps "
      "directly and entirely. Non-empty for some steps when the student "
      "has more steps than the reference.\n\n";
  text +=
      "\"matching_reference_steps\": list of REFERENCE ANSWER step numbers "
      "used to judge the step; several when one student step covers "
      "multiple reference steps. Empty when no reference step matches.\n\n";
  text += "\"error_category\": list of error types that made the step "
      "partially or fully incorrect, from:\n";
  for (const auto& category : profile.error_categories) {
    text += "  \"" + category.name + "\" when " + category.description + ",\n";
  }
  text += "Leave it as an empty list if the current step is completely "
      "correct.\n\n";
  text += "\"label\": binary score of the current step, CORRECT or INCORRECT.";
  return SystemGuidelines{profile.name, text};
}

namespace {

std::string escape_line(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '\n') {
      out += "\\n";
    } else if (c != '\r') {
      out.push_back(c);
    }
  }
  return out;
}

void render_section(std::string& out, const std::string& header,
                    const std::vector<std::string>& lines) {
  out += header;
  out += '\n';
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += "[" + std::to_string(i + 1) + "] " + escape_line(lines[i]);
    out += '\n';
  }
}

// Seeded order for one correctness class: shuffle, then rotate across
// topics so consecutive picks cover distinct topics when tags allow.
std::vector<Exemplar> topic_round_robin(std::vector<Exemplar> items,
                                        SplitMix64& rng) {
  portable_shuffle(items, rng);
  std::vector<std::string> topic_order;
  std::map<std::string, std::vector<Exemplar>> buckets;
  for (auto& e : items) {
    if (buckets.find(e.tags.topic) == buckets.end()) {
      topic_order.push_back(e.tags.topic);
    }
    buckets[e.tags.topic].push_back(std::move(e));
  }
  portable_shuffle(topic_order, rng);
  std::vector<Exemplar> ordered;
  ordered.reserve(items.size());
  bool took_any = true;
  while (took_any) {
    took_any = false;
    for (const auto& topic : topic_order) {
      auto& bucket = buckets[topic];
      if (bucket.empty()) continue;
      ordered.push_back(std::move(bucket.front()));
      bucket.erase(bucket.begin());
      took_any = true;
    }
  }
  return ordered;
}

}  // namespace

std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool,
                                       std::size_t k, std::uint64_t seed,
                                       const std::vector<std::string>& exclude,
                                       BalancePolicy policy) {
  std::set<std::string> excluded(exclude.begin(), exclude.end());
  std::vector<Exemplar> eligible;
  for (const auto& e : pool) {
    if (excluded.count(e.id) == 0) eligible.push_back(e);
  }
  if (eligible.size() < k) throw InsufficientPool(eligible.size(), k);
  if (k == 0) return {};

  SplitMix64 rng(seed);
  if (policy == BalancePolicy::none) {
    portable_shuffle(eligible, rng);
    eligible.resize(k);
    return eligible;
  }

  std::vector<Exemplar> correct;
  std::vector<Exemplar> incorrect;
  for (auto& e : eligible) {
    (e.tags.final_answer_correct ? correct : incorrect).push_back(std::move(e));
  }
  correct = topic_round_robin(std::move(correct), rng);
  incorrect = topic_round_robin(std::move(incorrect), rng);

  // Quotas within one of each other; the odd slot goes to a seeded side.
  std::size_t want_correct = k / 2;
  std::size_t want_incorrect = k / 2;
  if (k % 2 == 1) {
    (rng.next() & 1 ? want_correct : want_incorrect) += 1;
  }
  if (correct.size() < want_correct) {
    want_incorrect += want_correct - correct.size();
    want_correct = correct.size();
  }
  if (incorrect.size() < want_incorrect) {
    want_correct += want_incorrect - incorrect.size();
    want_incorrect = incorrect.size();
  }

  std::vector<Exemplar> picked;
  picked.reserve(k);
  std::size_t ci = 0;
  std::size_t ii = 0;
  bool take_correct = want_correct >= want_incorrect;
  while (picked.size() < k) {
    if (take_correct && ci < want_correct) {
      picked.push_back(correct[ci++]);
    } else if (!take_correct && ii < want_incorrect) {
      picked.push_back(incorrect[ii++]);
    } else if (ci < want_correct) {
      picked.push_back(correct[ci++]);
    } else {
      picked.push_back(incorrect[ii++]);
    }
    take_correct = !take_correct;
  }
  return picked;
}

std::string render_context(const Problem& problem) {
  std::string out;
  render_section(out, "QUESTION:", problem.context);
  return out;
}

std::string render_problem(const Problem& problem,
                           const Candidate& candidate) {
  std::string out;
  render_section(out, "QUESTION:", problem.context);
  out += '\n';
  render_section(out, "REFERENCE ANSWER:", problem.reference);
  out += '\n';
  render_section(out, "STUDENT'S ANSWER:", candidate.steps);
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

ChatRequest build_evaluation_prompt(const SystemGuidelines& guidelines,
                                    const std::vector<Exemplar>& exemplars,
                                    const Problem& problem,
                                    const Candidate& candidate,
                                    const std::string& model,
                                    const ChatDecoding& decoding) {
  ChatRequest request;
  request.endpoint_id = "judge";
  request.model = model;
  request.decoding = decoding;
  request.messages.push_back({"system", guidelines.text});
  for (const auto& exemplar : exemplars) {
    request.messages.push_back({"user", exemplar.user_text});
    request.messages.push_back({"assistant", exemplar.assistant_text});
  }
  request.messages.push_back({"user", render_problem(problem, candidate)});
  return request;
}

GenerationResult sample_generations(Gateway& gateway, const Problem& problem,
                                    const DatasetProfile& profile,
                                    int n_samples, double temperature,
                                    std::uint64_t seed) {
  std::string question;
  for (std::size_t i = 0; i < problem.context.size(); ++i) {
    if (i > 0) question += '\n';
    question += problem.context[i];
  }

  ChatRequest request;
  request.endpoint_id = gateway.endpoint().id;
  request.model = gateway.endpoint().model;
  request.messages.push_back({"system", profile.generation_guidelines});
  request.messages.push_back({"user", question});
  request.decoding.temperature = temperature;
  request.decoding.n = n_samples;
  request.decoding.seed = seed;

  ChatResponse response = gateway.complete(request);

  GenerationResult result;
  for (std::size_t i = 0; i < response.choices.size(); ++i) {
    const std::string& text = response.choices[i];
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      ++result.dropped;
      continue;
    }
    Decoding decoding;
    decoding.temperature = temperature;
    decoding.seed = seed;
    decoding.sample_index = static_cast<int>(i);
    result.candidates.push_back(
        make_candidate(problem.id, text, decoding, profile));
  }
  return result;
}

Exemplar exemplar_from_json(const Json& j, const DatasetProfile& profile) {
  Problem problem;
  problem.id = j.at("id").get<std::string>();
  problem.context = j.at("context").get<std::vector<std::string>>();
  problem.reference = j.at("reference").get<std::vector<std::string>>();
  problem.gold_answer_raw = j.value("gold_answer", std::string{});
  problem.profile = profile.name;

  Candidate candidate;
  candidate.problem_id = problem.id;
  candidate.steps = j.at("steps").get<std::vector<std::string>>();

  Exemplar exemplar;
  exemplar.id = problem.id;
  exemplar.user_text = render_problem(problem, candidate);
  exemplar.assistant_text = j.at("evaluation").get<std::string>();
  exemplar.tags.final_answer_correct = j.at("final_answer_correct").get<bool>();
  exemplar.tags.topic = j.value("topic", std::string{});
  exemplar.candidate_steps = static_cast<int>(candidate.steps.size());

  // Invariant: the gold evaluation must parse and validate cleanly against
  // its own problem.
  auto evals = parse_evaluation(exemplar.assistant_text, profile);
  ValidationReport report =
      validate_evaluation(evals, problem.context.size(),
                          problem.reference.size(), candidate.steps.size(),
                          profile);
  if (!report.valid()) {
    std::vector<std::string> errors;
    for (const auto& v : report.violations) {
      errors.push_back("exemplar '" + exemplar.id + "': " + v.describe());
    }
    throw ConfigError(errors);
  }
  return exemplar;
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path,
                                     const DatasetProfile& profile) {
  std::vector<Exemplar> pool;
  for (const auto& row : read_jsonl(path)) {
    pool.push_back(exemplar_from_json(row, profile));
  }
  return pool;
}

}  // namespace spare
