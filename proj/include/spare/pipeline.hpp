#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spare/config.hpp"
#include "spare/core.hpp"
#include "spare/gateway.hpp"
#include "spare/select.hpp"

namespace spare {

struct StageStats {
  std::string status = "ok";  // ok | skipped
  long inputs = 0;
  long outputs = 0;
  long failed = 0;
  long dropped = 0;
  long transport_calls = 0;
  long cache_hits = 0;
  long attempts = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  double wall_ms = 0.0;  // timing lives only in the manifest
};

// Per-run accounting: config and input digests, per-stage counts, token
// usage, wall-clock. Written atomically at the end of every invocation.
struct RunManifest {
  std::string run_id;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, StageStats> stages;
  std::string created_at;
  std::string updated_at;
  long http_transports = 0;  // 0 for hermetic (mock-only) runs

  Json to_json() const;
  static RunManifest from_json(const Json& j);
};

// Candidate answers and per-strategy scored views for one problem; the
// unit the selection strategies and grouped replication operate on.
struct ProblemSelection {
  Problem problem;
  std::vector<int> sample_indices;
  std::vector<std::optional<std::string>> answers;
  std::map<std::string, std::vector<ScoredSolution>> scored;  // prm / orm
};

// Runs one strategy over the candidate positions in `subset`
// (sc, orm, orm+sc, prm_bon, prm+sc). Empty optional when no candidate
// has a usable answer.
std::optional<std::string> run_strategy(const ProblemSelection& selection,
                                        const std::string& strategy,
                                        const std::vector<std::size_t>& subset);

// Profile metrics over one selection per problem; missing selections score
// as wrong.
std::map<std::string, double> compute_metrics(
    const DatasetProfile& profile,
    const std::vector<std::optional<std::string>>& selections,
    const std::vector<std::string>& golds);

struct ReplicationRow {
  int group = 0;
  // strategy -> metric -> value
  std::map<std::string, std::map<std::string, double>> metrics;
};

struct ReplicationReport {
  std::size_t group_size = 0;
  std::vector<ReplicationRow> rows;
  std::map<std::string, std::map<std::string, double>> mean;
};

// Partitions every problem's samples into disjoint seeded groups, runs
// selection per group, and reports per-group metrics plus their mean.
// Throws InsufficientSamples when a problem cannot fill the groups.
ReplicationReport grouped_replication(
    const std::vector<ProblemSelection>& selections,
    const std::vector<std::string>& strategies, int groups,
    std::size_t group_size, std::uint64_t seed, const DatasetProfile& profile);

// Stage driver. Stages read and write only their declared JSONL artifacts
// under config.output_dir and are independently re-runnable; the response
// cache makes reruns free of backend calls.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::string run_id, bool resume = false,
           bool dry_run = false);

  static const std::vector<std::string>& stage_names();

  void run_stage(const std::string& name);
  void run_all();

  const RunManifest& manifest() const { return manifest_; }
  std::filesystem::path artifact_path(const std::string& stage) const;

 private:
  void stage_ingest(StageStats& stats);
  void stage_generate(StageStats& stats);
  void stage_annotate(StageStats& stats);
  void stage_pairs(StageStats& stats);
  void stage_prm_export(StageStats& stats);
  void stage_score(StageStats& stats);
  void stage_select(StageStats& stats);
  void stage_eval(StageStats& stats);
  void stage_report(StageStats& stats);

  std::vector<Problem> load_problems() const;
  std::vector<Candidate> load_candidates() const;
  std::vector<ProblemSelection> build_selections() const;
  void require_artifact(const std::string& stage,
                        const std::string& producer) const;

  Gateway& generator_gateway();
  Gateway& judge_gateway();
  Gateway& scorer_gateway();
  Gateway& orm_gateway();
  Gateway& gateway_for(const EndpointConfig& endpoint,
                       std::unique_ptr<Gateway>& slot);
  void capture_stats(StageStats& stats,
                     const std::vector<Gateway*>& gateways,
                     const std::vector<GatewayStats>& before) const;
  void save_manifest();

  PipelineConfig config_;
  bool resume_ = false;
  bool dry_run_ = false;
  RunManifest manifest_;
  std::shared_ptr<ConcurrencyBudget> budget_;
  std::unique_ptr<Gateway> generator_;
  std::unique_ptr<Gateway> judge_;
  std::unique_ptr<Gateway> scorer_;
  std::unique_ptr<Gateway> orm_;
};

}  // namespace spare
