// Command-line front end for the staged red-team evaluation pipeline:
//   expand -> attack -> bench -> synth -> score -> analyze -> report
// Exit codes: 0 success, 2 config error, 3 dependency error,
//             4 backend exhaustion, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "misbind/errors.hpp"
#include "misbind/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string run_id;
  std::string stage;
  bool dry_run = false;
  bool resume = true;
  int replicates = 0;  // 0: keep the config value
};

int execute(const Options& options, const std::string& forced_stage) {
  misbind::PipelineConfig config = misbind::load_config(options.config_path);
  if (!options.run_id.empty()) {
    config.run_id = options.run_id;
  }
  if (options.replicates > 0) {
    config.replicates = options.replicates;
  }
  misbind::Pipeline pipeline(std::move(config));

  const std::string only_stage = forced_stage.empty() ? options.stage : forced_stage;
  if (options.dry_run) {
    std::cout << "run directory: " << pipeline.run_dir().string() << "\n";
    std::cout << "config hash:   " << pipeline.config_hash() << "\n";
    for (const auto& entry : pipeline.plan(options.resume, only_stage)) {
      std::cout << entry.stage << ": "
                << (entry.enabled ? (entry.would_run ? "run" : "skip") : "off")
                << " (" << entry.reason << ")\n";
    }
    return 0;
  }

  std::vector<std::string> executed;
  const misbind::RunManifest manifest =
      pipeline.run(options.resume, only_stage, &executed);
  std::cout << "run " << manifest.run_id << " complete; executed "
            << executed.size() << " stage(s)";
  if (!executed.empty()) {
    std::cout << ":";
    for (const auto& stage : executed) {
      std::cout << " " << stage;
    }
  }
  std::cout << "\nartifacts under " << pipeline.run_dir().string() << "\n";
  return 0;
}

void add_common_options(CLI::App* app, Options& options) {
  app->add_option("--config", options.config_path, "Pipeline config JSON")
      ->required();
  app->add_option("--run-id", options.run_id, "Override the run id");
  app->add_flag("--dry-run", options.dry_run,
                "Validate the config and print the execution plan");
  app->add_flag("--resume,!--no-resume", options.resume,
                "Skip stages whose outputs are already up to date (default on)");
  app->add_option("--replicates", options.replicates,
                  "Seeds per (prompt, model) pair; overrides the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"misbind: attribute-misbinding red-team evaluation pipeline"};
  app.require_subcommand(1);

  Options options;

  CLI::App* run = app.add_subcommand("run", "Run all enabled stages in order");
  add_common_options(run, options);
  run->add_option("--stage", options.stage, "Run only this stage");

  // One subcommand per stage.
  for (const auto& stage : misbind::Pipeline::stage_names()) {
    CLI::App* sub = app.add_subcommand(stage, "Run the " + stage + " stage");
    add_common_options(sub, options);
  }

  CLI11_PARSE(app, argc, argv);

  std::string forced_stage;
  for (const auto& stage : misbind::Pipeline::stage_names()) {
    if (app.got_subcommand(stage)) {
      forced_stage = stage;
    }
  }

  try {
    return execute(options, forced_stage);
  } catch (const misbind::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const misbind::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const misbind::BackendUnavailableError& e) {
    std::cerr << "backend exhausted: " << e.what() << "\n";
    return 4;
  } catch (const misbind::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
