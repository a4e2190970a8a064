// reason-iad: batch runs, metrics, backend conformance and toy-suite export.

#include <cstdlib>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "reason_iad/harness.hpp"
#include "reason_iad/toy_backend.hpp"
#include "reason_iad/toy_scenario.hpp"
#include "reason_iad/wire.hpp"

namespace {

using namespace reason_iad;

struct RunArgs {
  std::string dataset;
  std::string knowledge;
  std::string backend = "toy";
  std::string setting = "one-shot";
  std::string out;
  std::size_t jobs = 1;
  std::size_t toy_dim = 16;
  std::uint64_t toy_seed = 0;
  std::string backend_cmd;
  std::string backend_socket;
  Config config;
};

std::unique_ptr<ModelBackend> make_backend(const RunArgs& args) {
  if (args.backend == "toy") return std::make_unique<ToyBackend>(args.toy_dim, args.toy_seed);
  std::unique_ptr<wire::Client> client;
  if (!args.backend_socket.empty()) {
    client = std::make_unique<wire::Client>(wire::connect_unix_socket(args.backend_socket));
    client->handshake();
  } else {
    client = wire::connect_process(args.backend_cmd);
  }
  return client;
}

int run_command(RunArgs& args) {
  args.config.setting = parse_setting(args.setting);
  args.config.validate();
  const auto dataset = load_dataset(args.dataset);
  const auto repo = load_knowledge(args.knowledge);
  auto backend = make_backend(args);
  const BatchOutcome outcome = run_batch(dataset, repo, *backend, args.config, args.out, args.jobs);

  std::cout << "instances: " << dataset.size() << "\n";
  for (const auto& [subtask, acc] : outcome.report.per_subtask_accuracy) {
    std::cout << "  " << subtask << ": " << acc << "\n";
  }
  std::cout << "macro average: " << outcome.report.macro_average << "\n";
  std::cout << "report: " << (std::filesystem::path(args.out) / "report.json").string() << "\n";
  if (!outcome.ok()) {
    std::cerr << outcome.failed_ids.size() << " instance(s) failed:\n";
    for (const auto& row : outcome.report.per_instance) {
      if (row.error) std::cerr << "  " << row.instance_id << ": " << *row.error << "\n";
    }
    return 1;
  }
  return 0;
}

int metrics_command(const std::string& results) {
  const auto predictions = load_results(results);
  std::cout << emit_report(compute_metrics(predictions));
  return 0;
}

int conformance_command(const std::string& command) {
  const auto checks = wire::run_conformance(command);
  int failed = 0;
  for (const auto& c : checks) {
    const char* status = c.skipped ? "SKIP" : (c.passed ? "PASS" : "FAIL");
    std::cout << status << " " << c.name;
    if (!c.detail.empty()) std::cout << ": " << c.detail;
    std::cout << "\n";
    if (!c.passed && !c.skipped) ++failed;
  }
  std::cout << (checks.size() - failed) << "/" << checks.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-guided latent reasoning for industrial anomaly detection"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the engine over a dataset");
  run_cmd->add_option("--dataset", run.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--knowledge", run.knowledge, "Knowledge JSONL")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--backend", run.backend, "Backend")->check(CLI::IsMember({"toy", "wire"}));
  run_cmd->add_option("--setting", run.setting, "Setting")->check(CLI::IsMember({"one-shot", "zero-shot"}));
  run_cmd->add_option("--seed", run.config.seed, "Run seed");
  run_cmd->add_option("--iterations", run.config.iterations, "Optimization iterations");
  run_cmd->add_option("--latent-tokens", run.config.latent_tokens, "Latent tokens m");
  run_cmd->add_option("--top-k", run.config.top_k, "Retrieved knowledge entries");
  run_cmd->add_option("--patches", run.config.patches, "Candidate patches per trial");
  run_cmd->add_option("--eta", run.config.learning_rate, "Learning rate");
  run_cmd->add_option("--sigma-frac", run.config.sigma_fraction, "Perturbation scale relative to rms(Z)");
  run_cmd->add_option("--inner-trials", run.config.inner_trials, "Candidate trials per iteration (default m)");
  run_cmd->add_flag("--antithetic", run.config.antithetic, "Use mirrored perturbations");
  run_cmd->add_option("--jobs", run.jobs, "Parallel instances")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--toy-dim", run.toy_dim, "Toy backend dimension")->check(CLI::PositiveNumber);
  run_cmd->add_option("--toy-seed", run.toy_seed, "Toy backend weight seed");
  run_cmd->add_option("--backend-cmd", run.backend_cmd,
                      "Wire backend command (default: $REASON_IAD_BACKEND_CMD)");
  run_cmd->add_option("--backend-socket", run.backend_socket, "Connect to a wire backend on a Unix socket");

  std::string results;
  auto* metrics_cmd = app.add_subcommand("metrics", "Recompute a report from results.jsonl");
  metrics_cmd->add_option("--results", results, "Results JSONL")->required()->check(CLI::ExistingFile);

  std::string conformance_cmd_line;
  auto* conformance_cmd = app.add_subcommand("conformance", "Check a wire backend against the protocol");
  conformance_cmd->add_option("--backend-cmd", conformance_cmd_line, "Backend command")->required();

  std::string suite_out;
  std::size_t suite_dim = 16;
  std::uint64_t suite_seed = 0;
  ScenarioOptions scenario;
  auto* suite_cmd = app.add_subcommand("toy-suite", "Write the crafted toy scenario");
  suite_cmd->add_option("--out", suite_out, "Output directory")->required();
  suite_cmd->add_option("--toy-dim", suite_dim, "Toy backend dimension")->check(CLI::PositiveNumber);
  suite_cmd->add_option("--toy-seed", suite_seed, "Toy backend weight seed");
  suite_cmd->add_option("--instances", scenario.num_instances, "Number of instances");
  suite_cmd->add_option("--patches-per-image", scenario.num_patches, "Patches per query image");
  suite_cmd->add_option("--scenario-seed", scenario.seed, "Scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_command(run);
    if (*metrics_cmd) return metrics_command(results);
    if (*conformance_cmd) return conformance_command(conformance_cmd_line);
    if (*suite_cmd) {
      ToyBackend backend(suite_dim, suite_seed);
      save_crafted_suite(make_crafted_suite(backend, scenario), suite_out);
      std::cout << "wrote " << scenario.num_instances << " instances to " << suite_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "reason-iad: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
