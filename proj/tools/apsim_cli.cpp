// apsim: train, solve, evaluate and sweep the checkpoint intent-discrimination
// agents from the command line.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "apsim/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

unsigned worker_count() {
  const char* env = std::getenv("APSIM_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) throw apsim::ConfigError("APSIM_WORKERS must be a non-negative integer");
  if (n == 0) return std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(n);
}

std::string joined(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) out += (i ? " " : "") + std::string(argv[i]);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-perception agents for the checkpoint scenario"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out;
  long episodes = 0;
  std::string mode;
  std::string adversary;
  std::vector<std::string> agents;
  double eta = 0.0;
  std::string in_csv;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (defaults apply to missing keys)");
  };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", out, "Output path")->required(); };
  auto add_seed = [&](CLI::App* sub, bool many) {
    auto* opt = sub->add_option("--seed", seeds, many ? "Evaluation seed(s)" : "Seed");
    if (!many) opt->expected(1);
  };

  auto* train_agent = app.add_subcommand("train-agent", "Train the MaxEnt soft-Q agent");
  add_config(train_agent);
  add_seed(train_agent, false);
  add_out(train_agent);

  auto* train_adv = app.add_subcommand("train-adversary", "Train a learning adversary against an agent");
  add_config(train_adv);
  add_seed(train_adv, false);
  add_out(train_adv);
  train_adv->add_option("--agent", agents, "Agent model or policy file")->required()->expected(1);
  train_adv->add_option("--eta", eta, "Weight of the adversary's own goal reward")->required();

  auto* solve = app.add_subcommand("solve-ccpomdp", "Solve the chance-constrained POMDP baseline");
  add_config(solve);
  add_out(solve);

  auto* eval = app.add_subcommand("evaluate", "Evaluate one agent against one adversary");
  add_config(eval);
  add_seed(eval, true);
  add_out(eval);
  eval->add_option("--agent", agents, "Agent model or policy file")->required()->expected(1);
  eval->add_option("--adversary", adversary,
                   "neutral | population | generative:ALPHA,BETA | deceptive:B_THRE | learning:PATH")
      ->required();
  eval->add_option("--episodes", episodes, "Episodes per seed")->check(CLI::PositiveNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep agents over the eta or b_thre grid");
  add_config(sweep_cmd);
  add_seed(sweep_cmd, true);
  add_out(sweep_cmd);
  sweep_cmd->add_option("--mode", mode, "eta | bthre")->required();
  sweep_cmd->add_option("--agent", agents, "Agent model or policy file (repeatable)")->required();
  sweep_cmd->add_option("--episodes", episodes, "Episodes per seed and grid point")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Turn a metrics CSV into plot-data files");
  report->add_option("--in", in_csv, "Metrics CSV")->required();
  add_out(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    apsim::CommandContext ctx;
    if (!config_path.empty()) ctx.config = apsim::load_config(config_path);
    ctx.workers = worker_count();
    ctx.command_line = joined(argc, argv);
    ctx.log = &std::cerr;
    const std::uint64_t seed = seeds.empty() ? 0 : seeds.front();

    if (*train_agent) {
      apsim::cmd_train_agent(ctx, seed, out);
    } else if (*train_adv) {
      apsim::cmd_train_adversary(ctx, agents.front(), eta, seed, out);
    } else if (*solve) {
      apsim::cmd_solve_ccpomdp(ctx, out);
    } else if (*eval) {
      apsim::cmd_evaluate(ctx, agents.front(), adversary, episodes, seeds, out);
    } else if (*sweep_cmd) {
      const apsim::SweepMode m = apsim::parse_sweep_mode(mode);
      apsim::cmd_sweep(ctx, m, agents, seed, episodes, seeds, out);
    } else if (*report) {
      apsim::cmd_report(ctx, in_csv, out);
    }
  } catch (const apsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const apsim::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const apsim::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
