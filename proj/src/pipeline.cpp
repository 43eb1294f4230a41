#include "spare/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <set>

#include "spare/annotate.hpp"
#include "spare/digest.hpp"
#include "spare/evalqa.hpp"
#include "spare/judge.hpp"
#include "spare/parallel.hpp"
#include "spare/rng.hpp"
#include "spare/supervise.hpp"

namespace fs = std::filesystem;

namespace spare {

namespace {

const std::map<std::string, std::string> kArtifacts = {
    {"ingest", "problems.jsonl"},   {"generate", "candidates.jsonl"},
    {"annotate", "annotations.jsonl"}, {"pairs", "pairs.jsonl"},
    {"prm-export", "prm_train.jsonl"}, {"score", "scores.jsonl"},
    {"select", "selections.jsonl"}, {"eval", "eval.json"},
    {"report", "report.json"}};

std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

Json stage_stats_to_json(const StageStats& s) {
  Json j;
  j["status"] = s.status;
  j["inputs"] = s.inputs;
  j["outputs"] = s.outputs;
  j["failed"] = s.failed;
  j["dropped"] = s.dropped;
  j["transport_calls"] = s.transport_calls;
  j["cache_hits"] = s.cache_hits;
  j["attempts"] = s.attempts;
  j["prompt_tokens"] = s.prompt_tokens;
  j["completion_tokens"] = s.completion_tokens;
  j["wall_ms"] = s.wall_ms;
  return j;
}

StageStats stage_stats_from_json(const Json& j) {
  StageStats s;
  s.status = j.value("status", "ok");
  s.inputs = j.value("inputs", 0L);
  s.outputs = j.value("outputs", 0L);
  s.failed = j.value("failed", 0L);
  s.dropped = j.value("dropped", 0L);
  s.transport_calls = j.value("transport_calls", 0L);
  s.cache_hits = j.value("cache_hits", 0L);
  s.attempts = j.value("attempts", 0L);
  s.prompt_tokens = j.value("prompt_tokens", 0L);
  s.completion_tokens = j.value("completion_tokens", 0L);
  s.wall_ms = j.value("wall_ms", 0.0);
  return s;
}

}  // namespace

Json RunManifest::to_json() const {
  Json j;
  j["run_id"] = run_id;
  j["config_digest"] = config_digest;
  j["input_digests"] = input_digests;
  Json stages_json = Json::object();
  for (const auto& [name, stats] : stages) {
    stages_json[name] = stage_stats_to_json(stats);
  }
  j["stages"] = std::move(stages_json);
  j["http_transports"] = http_transports;
  j["created_at"] = created_at;
  j["updated_at"] = updated_at;
  return j;
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  m.run_id = j.value("run_id", std::string{});
  m.config_digest = j.value("config_digest", std::string{});
  if (j.contains("input_digests")) {
    m.input_digests =
        j.at("input_digests").get<std::map<std::string, std::string>>();
  }
  if (j.contains("stages")) {
    for (const auto& [name, stats] : j.at("stages").items()) {
      m.stages[name] = stage_stats_from_json(stats);
    }
  }
  m.http_transports = j.value("http_transports", 0L);
  m.created_at = j.value("created_at", std::string{});
  m.updated_at = j.value("updated_at", std::string{});
  return m;
}

std::optional<std::string> run_strategy(
    const ProblemSelection& selection, const std::string& strategy,
    const std::vector<std::size_t>& subset) {
  try {
    if (strategy == "sc") {
      std::vector<std::optional<std::string>> answers;
      for (std::size_t i : subset) answers.push_back(selection.answers[i]);
      return self_consistency(answers);
    }
    std::string source = strategy == "orm" || strategy == "orm+sc" ? "orm" : "prm";
    auto it = selection.scored.find(source);
    if (it == selection.scored.end()) {
      throw MissingArtifact("select", "scores.jsonl rows for '" + source + "'");
    }
    std::vector<ScoredSolution> scored;
    for (std::size_t i : subset) scored.push_back(it->second[i]);
    if (strategy == "orm" || strategy == "prm_bon") return best_of_n(scored);
    return weighted_vote(scored);  // orm+sc / prm+sc
  } catch (const NoAnswers&) {
    return std::nullopt;
  }
}

std::map<std::string, double> compute_metrics(
    const DatasetProfile& profile,
    const std::vector<std::optional<std::string>>& selections,
    const std::vector<std::string>& golds) {
  std::vector<std::string> predictions;
  predictions.reserve(selections.size());
  for (const auto& s : selections) predictions.push_back(s.value_or(""));

  std::map<std::string, double> out;
  for (const auto& metric : profile.metrics) {
    if (metric == "exact_match") {
      out["exact_match"] = exact_match(predictions, golds);
    } else if (metric == "answer_f1") {
      double sum = 0.0;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        sum += answer_f1(predictions[i], golds[i]);
      }
      out["answer_f1"] = predictions.empty() ? 0.0 : sum / predictions.size();
    } else if (metric == "macro_f1") {
      std::set<std::string> labels(golds.begin(), golds.end());
      out["macro_f1"] = macro_f1(
          predictions, golds,
          std::vector<std::string>(labels.begin(), labels.end()));
    }
  }
  return out;
}

ReplicationReport grouped_replication(
    const std::vector<ProblemSelection>& selections,
    const std::vector<std::string>& strategies, int groups,
    std::size_t group_size, std::uint64_t seed,
    const DatasetProfile& profile) {
  if (groups < 1) throw InsufficientSamples("groups must be >= 1");
  if (selections.empty()) throw InsufficientSamples("no problems to evaluate");

  std::size_t available = selections.front().answers.size();
  for (const auto& s : selections) {
    available = std::min(available, s.answers.size());
  }
  std::size_t size = group_size;
  if (size == 0) size = available / static_cast<std::size_t>(groups);
  if (size == 0 || size * static_cast<std::size_t>(groups) > available) {
    throw InsufficientSamples(
        "need " + std::to_string(static_cast<std::size_t>(groups) *
                                 (size == 0 ? 1 : size)) +
        " samples per problem, smallest problem has " +
        std::to_string(available));
  }

  // Disjoint groups from a seeded shuffle of each problem's positions.
  std::vector<std::vector<std::size_t>> positions(selections.size());
  for (std::size_t p = 0; p < selections.size(); ++p) {
    positions[p].resize(selections[p].answers.size());
    for (std::size_t i = 0; i < positions[p].size(); ++i) positions[p][i] = i;
    SplitMix64 rng(mix_seed(seed, "replication:" + selections[p].problem.id));
    portable_shuffle(positions[p], rng);
  }

  ReplicationReport report;
  report.group_size = size;
  std::vector<std::string> golds;
  for (const auto& s : selections) golds.push_back(s.problem.gold_answer);

  for (int g = 0; g < groups; ++g) {
    ReplicationRow row;
    row.group = g;
    for (const auto& strategy : strategies) {
      std::vector<std::optional<std::string>> selected;
      for (std::size_t p = 0; p < selections.size(); ++p) {
        std::vector<std::size_t> subset(
            positions[p].begin() + static_cast<std::ptrdiff_t>(g * size),
            positions[p].begin() + static_cast<std::ptrdiff_t>((g + 1) * size));
        std::sort(subset.begin(), subset.end());
        selected.push_back(run_strategy(selections[p], strategy, subset));
      }
      row.metrics[strategy] = compute_metrics(profile, selected, golds);
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& strategy : strategies) {
    std::map<std::string, double> sums;
    for (const auto& row : report.rows) {
      for (const auto& [metric, value] : row.metrics.at(strategy)) {
        sums[metric] += value;
      }
    }
    for (auto& [metric, value] : sums) value /= groups;
    report.mean[strategy] = sums;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {
      "ingest", "generate", "annotate", "pairs",  "prm-export",
      "score",  "select",   "eval",     "report"};
  return names;
}

Pipeline::Pipeline(PipelineConfig config, std::string run_id, bool resume,
                   bool dry_run)
    : config_(std::move(config)),
      resume_(resume),
      dry_run_(dry_run),
      budget_(std::make_shared<ConcurrencyBudget>(config_.concurrency)) {
  fs::path manifest_path = config_.output_dir / "run_manifest.json";
  if (run_id.empty()) run_id = "run-" + config_.digest.substr(0, 12);
  if (fs::exists(manifest_path)) {
    RunManifest existing =
        RunManifest::from_json(Json::parse(read_text(manifest_path)));
    if (existing.run_id == run_id) manifest_ = existing;
  }
  manifest_.run_id = run_id;
  manifest_.config_digest = config_.digest;
  if (manifest_.created_at.empty()) manifest_.created_at = iso_now();
}

fs::path Pipeline::artifact_path(const std::string& stage) const {
  auto it = kArtifacts.find(stage);
  if (it == kArtifacts.end()) {
    throw ConfigError({"unknown stage '" + stage + "'"});
  }
  return config_.output_dir / it->second;
}

void Pipeline::require_artifact(const std::string& stage,
                                const std::string& producer) const {
  fs::path path = artifact_path(producer);
  if (!fs::exists(path)) throw MissingArtifact(stage, path.string());
}

Gateway& Pipeline::gateway_for(const EndpointConfig& endpoint,
                               std::unique_ptr<Gateway>& slot) {
  if (!slot) {
    slot = std::make_unique<Gateway>(make_transport(endpoint), endpoint,
                                     config_.cache_dir, config_.retries,
                                     config_.backoff_ms, budget_);
  }
  return *slot;
}

Gateway& Pipeline::generator_gateway() {
  return gateway_for(config_.generator, generator_);
}
Gateway& Pipeline::judge_gateway() { return gateway_for(config_.judge, judge_); }
Gateway& Pipeline::scorer_gateway() {
  if (!config_.scorer) {
    throw ConfigError({"endpoints.scorer is not configured"});
  }
  return gateway_for(*config_.scorer, scorer_);
}
Gateway& Pipeline::orm_gateway() {
  if (!config_.orm_scorer) {
    throw ConfigError({"endpoints.orm_scorer is not configured"});
  }
  return gateway_for(*config_.orm_scorer, orm_);
}

void Pipeline::capture_stats(StageStats& stats,
                             const std::vector<Gateway*>& gateways,
                             const std::vector<GatewayStats>& before) const {
  for (std::size_t i = 0; i < gateways.size(); ++i) {
    GatewayStats now = gateways[i]->stats();
    stats.transport_calls += now.transport_calls - before[i].transport_calls;
    stats.cache_hits += now.cache_hits - before[i].cache_hits;
    stats.attempts += now.attempts - before[i].attempts;
    stats.prompt_tokens +=
        now.usage.prompt_tokens - before[i].usage.prompt_tokens;
    stats.completion_tokens +=
        now.usage.completion_tokens - before[i].usage.completion_tokens;
  }
}

void Pipeline::save_manifest() {
  manifest_.updated_at = iso_now();
  manifest_.http_transports = HttpTransport::instances_created();
  write_json_atomic(config_.output_dir / "run_manifest.json",
                    manifest_.to_json());
}

std::vector<Problem> Pipeline::load_problems() const {
  std::vector<Problem> problems;
  for (const auto& row : read_jsonl(artifact_path("ingest"))) {
    problems.push_back(problem_from_json(row));
  }
  return problems;
}

std::vector<Candidate> Pipeline::load_candidates() const {
  std::vector<Candidate> candidates;
  for (const auto& row : read_jsonl(artifact_path("generate"))) {
    candidates.push_back(candidate_from_json(row));
  }
  return candidates;
}

void Pipeline::run_stage(const std::string& name) {
  if (std::find(stage_names().begin(), stage_names().end(), name) ==
      stage_names().end()) {
    throw ConfigError({"unknown stage '" + name + "'"});
  }
  if (dry_run_) {
    std::cout << "[dry-run] stage " << name << " -> "
              << artifact_path(name).string() << "\n";
    return;
  }

  fs::create_directories(config_.output_dir);
  StageStats stats;
  if (resume_ && fs::exists(artifact_path(name))) {
    stats.status = "skipped";
    manifest_.stages[name] = stats;
    save_manifest();
    return;
  }

  auto t0 = std::chrono::steady_clock::now();
  if (name == "ingest") {
    stage_ingest(stats);
  } else if (name == "generate") {
    stage_generate(stats);
  } else if (name == "annotate") {
    stage_annotate(stats);
  } else if (name == "pairs") {
    stage_pairs(stats);
  } else if (name == "prm-export") {
    stage_prm_export(stats);
  } else if (name == "score") {
    stage_score(stats);
  } else if (name == "select") {
    stage_select(stats);
  } else if (name == "eval") {
    stage_eval(stats);
  } else {
    stage_report(stats);
  }
  auto t1 = std::chrono::steady_clock::now();
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  manifest_.stages[name] = stats;
  save_manifest();
}

void Pipeline::run_all() {
  for (const auto& name : stage_names()) run_stage(name);
}

void Pipeline::stage_ingest(StageStats& stats) {
  if (!fs::exists(config_.problems_file)) {
    throw MissingArtifact("ingest", config_.problems_file.string());
  }
  std::vector<Json> rows;
  for (const auto& raw : read_jsonl(config_.problems_file)) {
    ++stats.inputs;
    Problem problem = make_problem(raw);
    if (problem.profile != config_.profile) {
      throw ConfigError({"problem '" + problem.id + "' has profile '" +
                         problem.profile + "', config expects '" +
                         config_.profile + "'"});
    }
    rows.push_back(problem_to_json(problem));
    ++stats.outputs;
  }
  write_jsonl_atomic(artifact_path("ingest"), rows);
  manifest_.input_digests["problems"] = file_digest(config_.problems_file);
}

void Pipeline::stage_generate(StageStats& stats) {
  require_artifact("generate", "ingest");
  std::vector<Problem> problems = load_problems();
  const DatasetProfile& profile = get_profile(config_.profile);
  Gateway& gateway = generator_gateway();
  std::vector<GatewayStats> before = {gateway.stats()};

  auto results = parallel_map(problems, config_.concurrency,
                              [&](const Problem& problem) {
                                return sample_generations(
                                    gateway, problem, profile,
                                    config_.samples_per_problem,
                                    config_.generation_temperature,
                                    mix_seed(config_.seed,
                                             "generate:" + problem.id));
                              });

  std::vector<Json> rows;
  for (const auto& result : results) {
    stats.dropped += result.dropped;
    for (const auto& candidate : result.candidates) {
      rows.push_back(candidate_to_json(candidate));
      ++stats.outputs;
    }
  }
  stats.inputs = static_cast<long>(problems.size());
  write_jsonl_atomic(artifact_path("generate"), rows);
  capture_stats(stats, {&gateway}, before);
}

void Pipeline::stage_annotate(StageStats& stats) {
  require_artifact("annotate", "ingest");
  require_artifact("annotate", "generate");
  if (!fs::exists(config_.exemplars_file)) {
    throw MissingArtifact("annotate", config_.exemplars_file.string());
  }

  std::vector<Problem> problems = load_problems();
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;
  std::vector<Candidate> candidates = load_candidates();
  const DatasetProfile& profile = get_profile(config_.profile);

  std::vector<Exemplar> pool = load_exemplars(config_.exemplars_file, profile);
  manifest_.input_digests["exemplars"] = file_digest(config_.exemplars_file);

  Gateway& gateway = judge_gateway();
  std::vector<GatewayStats> before = {gateway.stats()};

  JudgeContext context;
  context.gateway = &gateway;
  context.guidelines = build_system_guidelines(profile);
  context.pool = &pool;
  context.exemplar_count = config_.exemplar_count;
  context.seed = mix_seed(config_.seed, "annotate");
  context.attempt_budget = config_.judge_attempts;

  auto annotations = parallel_map(
      candidates, config_.concurrency, [&](const Candidate& candidate) {
        auto it = by_id.find(candidate.problem_id);
        if (it == by_id.end()) {
          throw MissingArtifact("annotate", "problem '" +
                                                candidate.problem_id +
                                                "' not in problems.jsonl");
        }
        return annotate_candidate(*it->second, candidate, context);
      });

  std::vector<Json> rows;
  for (const auto& annotation : annotations) {
    rows.push_back(annotation_to_json(annotation));
    annotation.ok() ? ++stats.outputs : ++stats.failed;
  }
  stats.inputs = static_cast<long>(candidates.size());
  write_jsonl_atomic(artifact_path("annotate"), rows);
  capture_stats(stats, {&gateway}, before);
}

void Pipeline::stage_pairs(StageStats& stats) {
  require_artifact("pairs", "ingest");
  require_artifact("pairs", "generate");
  require_artifact("pairs", "annotate");

  std::vector<Problem> problems = load_problems();
  std::map<std::pair<std::string, int>, const Candidate*> candidate_by_key;
  std::vector<Candidate> candidates = load_candidates();
  for (const auto& c : candidates) {
    candidate_by_key[{c.problem_id, c.decoding.sample_index}] = &c;
  }

  std::map<std::string, std::vector<AnnotatedCandidate>> annotated;
  for (const auto& row : read_jsonl(artifact_path("annotate"))) {
    ProcessAnnotation a = annotation_from_json(row);
    ++stats.inputs;
    if (!a.ok()) continue;
    annotated[a.problem_id].push_back(
        {a.sample_index,
         {a.outcome.correct ? +1 : -1, a.mean_score}});
  }

  PairPolicy policy = pair_policy_from_string(config_.pair_policy);
  std::vector<PairRow> rows;
  for (const auto& problem : problems) {
    auto it = annotated.find(problem.id);
    if (it == annotated.end()) continue;
    auto pairs = build_preference_pairs(problem.id, it->second, policy,
                                        config_.pair_cap,
                                        mix_seed(config_.seed, "pairs"));
    std::string prompt = render_context(problem);
    for (const auto& pair : pairs) {
      const Candidate* chosen =
          candidate_by_key.at({problem.id, pair.chosen_index});
      const Candidate* rejected =
          candidate_by_key.at({problem.id, pair.rejected_index});
      rows.push_back({problem.id, prompt, chosen->raw_text,
                      rejected->raw_text, policy, pair.chosen_score,
                      pair.rejected_score});
    }
  }
  export_pair_rows(artifact_path("pairs"), rows);
  stats.outputs = static_cast<long>(rows.size());
}

void Pipeline::stage_prm_export(StageStats& stats) {
  require_artifact("prm-export", "ingest");
  require_artifact("prm-export", "generate");
  require_artifact("prm-export", "annotate");

  std::vector<Problem> problems = load_problems();
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;
  std::map<std::pair<std::string, int>, const Candidate*> candidate_by_key;
  std::vector<Candidate> candidates = load_candidates();
  for (const auto& c : candidates) {
    candidate_by_key[{c.problem_id, c.decoding.sample_index}] = &c;
  }

  std::vector<ProcessAnnotation> pool;
  for (const auto& row : read_jsonl(artifact_path("annotate"))) {
    pool.push_back(annotation_from_json(row));
  }
  stats.inputs = static_cast<long>(pool.size());

  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (const auto& a : pool) {
    if (!a.ok()) continue;
    (a.outcome.correct ? positives : negatives) += 1;
  }
  std::size_t per_class = config_.prm_per_class > 0
                              ? config_.prm_per_class
                              : std::min(positives, negatives);

  std::vector<PrmTrainingRecord> records;
  if (per_class > 0) {
    auto subset =
        balanced_sample(pool, per_class, mix_seed(config_.seed, "prm-export"));
    for (const auto& annotation : subset) {
      const Problem* problem = by_id.at(annotation.problem_id);
      const Candidate* candidate = candidate_by_key.at(
          {annotation.problem_id, annotation.sample_index});
      records.push_back(make_prm_record(*problem, *candidate, annotation,
                                        config_.prm_marker));
    }
  }
  export_prm_records(artifact_path("prm-export"), records);
  stats.outputs = static_cast<long>(records.size());
}

void Pipeline::stage_score(StageStats& stats) {
  require_artifact("score", "generate");
  std::vector<Candidate> candidates = load_candidates();
  stats.inputs = static_cast<long>(candidates.size());

  std::vector<Json> rows;
  std::vector<Gateway*> used;
  std::vector<GatewayStats> before;

  bool have_prm = config_.score_file.has_value() || config_.scorer.has_value();
  if (have_prm) {
    ScoringBackend backend;
    std::map<std::pair<std::string, int>, std::vector<double>> file_scores;
    if (config_.score_file) {
      if (!fs::exists(*config_.score_file)) {
        throw MissingArtifact("score", config_.score_file->string());
      }
      file_scores = load_score_file(*config_.score_file);
      backend.kind = ScoringBackend::Kind::file;
      backend.file_scores = &file_scores;
    } else {
      backend.kind = ScoringBackend::Kind::endpoint;
      backend.gateway = &scorer_gateway();
      backend.marker = config_.prm_marker;
      used.push_back(backend.gateway);
      before.push_back(backend.gateway->stats());
    }
    Aggregation aggregation = aggregation_from_string(config_.aggregation);
    auto scored = parallel_map(
        candidates, config_.concurrency, [&](const Candidate& candidate) {
          ScoredSolution solution;
          solution.problem_id = candidate.problem_id;
          solution.sample_index = candidate.decoding.sample_index;
          solution.step_probs = score_with_backend(candidate, backend);
          solution.solution_score =
              aggregate_step_scores(solution.step_probs, aggregation);
          solution.strategy = "prm";
          return solution;
        });
    for (const auto& solution : scored) {
      rows.push_back(scored_solution_to_json(solution));
      ++stats.outputs;
    }
  }

  if (config_.orm_scorer) {
    Gateway& gateway = orm_gateway();
    used.push_back(&gateway);
    before.push_back(gateway.stats());
    auto scored = parallel_map(
        candidates, config_.concurrency, [&](const Candidate& candidate) {
          ScoredSolution solution;
          solution.problem_id = candidate.problem_id;
          solution.sample_index = candidate.decoding.sample_index;
          solution.step_probs = gateway.step_scores({candidate.raw_text},
                                                    config_.prm_marker);
          if (solution.step_probs.size() != 1) {
            throw CountMismatch(1, solution.step_probs.size());
          }
          solution.solution_score = solution.step_probs.front();
          solution.strategy = "orm";
          return solution;
        });
    for (const auto& solution : scored) {
      rows.push_back(scored_solution_to_json(solution));
      ++stats.outputs;
    }
  }

  write_jsonl_atomic(artifact_path("score"), rows);
  capture_stats(stats, used, before);
}

std::vector<ProblemSelection> Pipeline::build_selections() const {
  std::vector<Problem> problems = load_problems();
  std::vector<Candidate> candidates = load_candidates();

  std::map<std::pair<std::string, int>, ScoredSolution> prm_scores;
  std::map<std::pair<std::string, int>, ScoredSolution> orm_scores;
  fs::path scores_path = artifact_path("score");
  if (fs::exists(scores_path)) {
    for (const auto& row : read_jsonl(scores_path)) {
      ScoredSolution solution = scored_solution_from_json(row);
      auto key = std::make_pair(solution.problem_id, solution.sample_index);
      (solution.strategy == "orm" ? orm_scores : prm_scores)[key] = solution;
    }
  }

  std::vector<ProblemSelection> selections;
  for (const auto& problem : problems) {
    ProblemSelection ps;
    ps.problem = problem;
    for (const auto& candidate : candidates) {
      if (candidate.problem_id != problem.id) continue;
      ps.sample_indices.push_back(candidate.decoding.sample_index);
      ps.answers.push_back(candidate.extracted_answer);
      auto key =
          std::make_pair(problem.id, candidate.decoding.sample_index);
      auto fill = [&](const std::map<std::pair<std::string, int>,
                                     ScoredSolution>& scores,
                      const std::string& tag) {
        auto it = scores.find(key);
        if (it == scores.end()) return;
        ScoredSolution solution = it->second;
        solution.answer = candidate.extracted_answer;
        ps.scored[tag].push_back(std::move(solution));
      };
      fill(prm_scores, "prm");
      fill(orm_scores, "orm");
    }
    // Scored views must stay position-aligned with answers; drop a view
    // that is missing rows for some candidates.
    for (auto it = ps.scored.begin(); it != ps.scored.end();) {
      if (it->second.size() != ps.answers.size()) {
        it = ps.scored.erase(it);
      } else {
        ++it;
      }
    }
    if (!ps.answers.empty()) selections.push_back(std::move(ps));
  }
  return selections;
}

void Pipeline::stage_select(StageStats& stats) {
  require_artifact("select", "ingest");
  require_artifact("select", "generate");
  for (const auto& strategy : config_.strategies) {
    if (strategy != "sc") {
      require_artifact("select", "score");
      break;
    }
  }

  std::vector<ProblemSelection> selections = build_selections();
  std::vector<Json> rows;
  for (const auto& ps : selections) {
    ++stats.inputs;
    std::vector<std::size_t> all(ps.answers.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (const auto& strategy : config_.strategies) {
      auto answer = run_strategy(ps, strategy, all);
      Json row;
      row["problem_id"] = ps.problem.id;
      row["strategy"] = strategy;
      if (answer) {
        row["selected_answer"] = *answer;
        row["correct"] = *answer == ps.problem.gold_answer;
      } else {
        row["selected_answer"] = nullptr;
        row["correct"] = false;
      }
      rows.push_back(std::move(row));
      ++stats.outputs;
    }
  }
  write_jsonl_atomic(artifact_path("select"), rows);
}

void Pipeline::stage_eval(StageStats& stats) {
  require_artifact("eval", "ingest");
  require_artifact("eval", "select");

  std::vector<Problem> problems = load_problems();
  const DatasetProfile& profile = get_profile(config_.profile);
  std::map<std::string, std::size_t> problem_pos;
  std::vector<std::string> golds;
  for (const auto& p : problems) {
    problem_pos[p.id] = golds.size();
    golds.push_back(p.gold_answer);
  }

  // strategy -> per-problem selection, problems order.
  std::map<std::string, std::vector<std::optional<std::string>>> selected;
  for (const auto& row : read_jsonl(artifact_path("select"))) {
    std::string strategy = row.at("strategy").get<std::string>();
    auto& slot = selected[strategy];
    if (slot.empty()) slot.resize(problems.size());
    ++stats.inputs;
    if (!row.at("selected_answer").is_null()) {
      slot[problem_pos.at(row.at("problem_id").get<std::string>())] =
          row.at("selected_answer").get<std::string>();
    }
  }

  Json metrics = Json::object();
  for (const auto& [strategy, answers] : selected) {
    Json entry = Json::object();
    for (const auto& [metric, value] :
         compute_metrics(profile, answers, golds)) {
      entry[metric] = value;
    }
    metrics[strategy] = std::move(entry);
  }

  Json eval_doc;
  eval_doc["metrics"] = std::move(metrics);

  if (config_.eval_groups > 0) {
    auto selections = build_selections();
    ReplicationReport report = grouped_replication(
        selections, config_.strategies, config_.eval_groups,
        config_.eval_group_size, mix_seed(config_.seed, "eval"), profile);
    Json rows = Json::array();
    for (const auto& row : report.rows) {
      Json entry;
      entry["group"] = row.group;
      entry["metrics"] = row.metrics;
      rows.push_back(std::move(entry));
    }
    eval_doc["replication"] = Json{{"groups", config_.eval_groups},
                                   {"group_size", report.group_size},
                                   {"rows", std::move(rows)},
                                   {"mean", report.mean}};
  } else {
    eval_doc["replication"] = nullptr;
  }

  // Score distributions by final-answer correctness (PRM rows preferred).
  fs::path scores_path = artifact_path("score");
  eval_doc["distribution"] = nullptr;
  if (fs::exists(scores_path)) {
    std::map<std::pair<std::string, int>, bool> outcome;
    for (const auto& candidate : load_candidates()) {
      auto pos = problem_pos.find(candidate.problem_id);
      if (pos == problem_pos.end()) continue;
      bool correct = candidate.extracted_answer &&
                     *candidate.extracted_answer == golds[pos->second];
      outcome[{candidate.problem_id, candidate.decoding.sample_index}] =
          correct;
    }
    std::vector<ScoredOutcome> prm_scored;
    std::vector<ScoredOutcome> orm_scored;
    for (const auto& row : read_jsonl(scores_path)) {
      ScoredSolution solution = scored_solution_from_json(row);
      auto it = outcome.find({solution.problem_id, solution.sample_index});
      if (it == outcome.end()) continue;
      (solution.strategy == "orm" ? orm_scored : prm_scored)
          .push_back({solution.solution_score, it->second});
    }
    const auto& scored = prm_scored.empty() ? orm_scored : prm_scored;
    if (!scored.empty()) {
      eval_doc["distribution"] =
          distribution_summary_to_json(score_distribution_summary(scored));
    }
  }

  // Agreement against human step labels, stratified by alignment kind.
  eval_doc["agreement"] = nullptr;
  if (config_.human_labels_file) {
    if (!fs::exists(*config_.human_labels_file)) {
      throw MissingArtifact("eval", config_.human_labels_file->string());
    }
    require_artifact("eval", "annotate");
    std::map<std::pair<std::string, int>, ProcessAnnotation> annotations;
    for (const auto& row : read_jsonl(artifact_path("annotate"))) {
      ProcessAnnotation a = annotation_from_json(row);
      annotations[{a.problem_id, a.sample_index}] = std::move(a);
    }
    std::vector<LabelPair> pairs;
    for (const auto& row : read_jsonl(*config_.human_labels_file)) {
      auto key = std::make_pair(row.at("problem_id").get<std::string>(),
                                row.at("sample_index").get<int>());
      auto it = annotations.find(key);
      if (it == annotations.end() || !it->second.ok()) continue;
      int step = row.at("student_step").get<int>();
      for (const auto& e : it->second.evaluations) {
        if (e.student_step != step) continue;
        LabelPair pair;
        pair.predicted_correct = e.label_correct;
        pair.human_correct =
            row.at("label").get<std::string>() == "CORRECT";
        pair.kind = classify_alignment(e);
        pairs.push_back(pair);
        break;
      }
    }
    if (!pairs.empty()) {
      eval_doc["agreement"] =
          agreement_report_to_json(annotation_agreement(pairs));
    }
    manifest_.input_digests["human_labels"] =
        file_digest(*config_.human_labels_file);
  }

  write_json_atomic(artifact_path("eval"), eval_doc);
  stats.outputs = 1;
}

void Pipeline::stage_report(StageStats& stats) {
  require_artifact("report", "eval");
  Json eval_doc = Json::parse(read_text(artifact_path("eval")));

  Json tokens;
  long prompt_total = 0;
  long completion_total = 0;
  Json per_stage = Json::object();
  for (const auto& [name, stage] : manifest_.stages) {
    if (stage.prompt_tokens == 0 && stage.completion_tokens == 0 &&
        stage.transport_calls == 0) {
      continue;
    }
    per_stage[name] = Json{{"prompt_tokens", stage.prompt_tokens},
                           {"completion_tokens", stage.completion_tokens},
                           {"transport_calls", stage.transport_calls},
                           {"cache_hits", stage.cache_hits}};
    prompt_total += stage.prompt_tokens;
    completion_total += stage.completion_tokens;
  }
  tokens["stages"] = std::move(per_stage);
  tokens["total"] = Json{{"prompt_tokens", prompt_total},
                         {"completion_tokens", completion_total}};

  Json report;
  report["run_id"] = manifest_.run_id;
  report["config_digest"] = manifest_.config_digest;
  report["metrics"] = eval_doc.value("metrics", Json::object());
  report["replication"] = eval_doc.value("replication", Json());
  report["agreement"] = eval_doc.value("agreement", Json());
  report["distribution"] = eval_doc.value("distribution", Json());
  report["tokens"] = std::move(tokens);
  write_json_atomic(artifact_path("report"), report);

  if (!eval_doc.value("distribution", Json()).is_null()) {
    DistributionSummary summary;
    const Json& dist = eval_doc.at("distribution");
    summary.bins = dist.at("bins").get<int>();
    summary.correct.histogram =
        dist.at("correct").at("histogram").get<std::vector<long>>();
    summary.incorrect.histogram =
        dist.at("incorrect").at("histogram").get<std::vector<long>>();
    write_text_atomic(config_.output_dir / "histogram.csv",
                      histogram_csv(summary));
  }
  stats.outputs = 1;
}

}  // namespace spare
