// spare: single-pass reference-guided process-annotation toolkit.
//
// Subcommands map 1:1 onto pipeline stages; `run` executes them in order
// (or a single one via --stage). Every invocation validates the config
// up front and emits a machine-readable error object on failure.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "spare/config.hpp"
#include "spare/errors.hpp"
#include "spare/jsonl.hpp"
#include "spare/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string run_id;
  bool resume = false;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "pipeline config file")
      ->required();
  cmd->add_option("--run-id", options.run_id,
                  "run identifier (default: derived from the config digest)");
  cmd->add_flag("--resume", options.resume,
                "skip stages whose artifact already exists");
  cmd->add_flag("--dry-run", options.dry_run,
                "print the plan without writing anything");
}

int execute(const CommonOptions& options, const std::string& stage) {
  spare::PipelineConfig config = spare::validate_config(options.config_path);
  spare::Pipeline pipeline(config, options.run_id, options.resume,
                           options.dry_run);
  if (stage.empty()) {
    pipeline.run_all();
  } else {
    pipeline.run_stage(stage);
  }
  return 0;
}

int fail(const std::string& kind, const std::string& message, int code) {
  spare::Json error;
  error["error"] = kind;
  error["message"] = message;
  std::cerr << error.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPARE process-annotation pipeline"};
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, std::string>> stage_commands;
  CommonOptions options;

  for (const auto& stage : spare::Pipeline::stage_names()) {
    CLI::App* cmd =
        app.add_subcommand(stage, "run the " + stage + " stage");
    add_common(cmd, options);
    stage_commands.emplace_back(cmd, stage);
  }

  std::string run_stage;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run all stages in order (or one via --stage)");
  add_common(run_cmd, options);
  run_cmd->add_option("--stage", run_stage, "run only this stage");

  CLI11_PARSE(app, argc, argv);

  std::string stage;
  if (run_cmd->parsed()) {
    stage = run_stage;
  } else {
    for (const auto& [cmd, name] : stage_commands) {
      if (cmd->parsed()) {
        stage = name;
        break;
      }
    }
  }

  try {
    return execute(options, stage);
  } catch (const spare::ConfigError& e) {
    return fail("config_error", e.what(), 2);
  } catch (const spare::MissingArtifact& e) {
    return fail("missing_artifact", e.what(), 3);
  } catch (const spare::Error& e) {
    return fail("error", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal_error", e.what(), 1);
  }
}
