#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "apsim/ccpomdp.hpp"
#include "apsim/config.hpp"
#include "apsim/evaluation.hpp"
#include "apsim/io.hpp"
#include "apsim/maxent_agent.hpp"

namespace apsim {

/// What every command needs besides its own arguments.
struct CommandContext {
  ExperimentConfig config;
  unsigned workers = 1;
  std::string command_line;  // recorded in the manifest
  std::ostream* log = nullptr;
};

namespace detail {

inline std::shared_ptr<const OpponentModel> make_model(const ExperimentConfig& cfg) {
  return std::make_shared<const OpponentModel>(cfg.scenario(), cfg.quadrature_nodes);
}

inline void finish(const CommandContext& ctx, const std::string& started, const std::vector<std::uint64_t>& seeds,
                   const std::vector<std::string>& outputs) {
  RunManifest m;
  m.command = ctx.command_line;
  m.config_hash = config_hash(ctx.config);
  m.seeds = seeds;
  m.started = started;
  m.finished = utc_timestamp();
  m.outputs = outputs;
  write_manifest(m);
}

inline void note(const CommandContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << std::endl;
}

}  // namespace detail

inline void cmd_train_agent(const CommandContext& ctx, std::uint64_t seed, const std::string& out) {
  const std::string started = utc_timestamp();
  const ExperimentConfig& cfg = ctx.config;
  BeliefFilter filter(detail::make_model(cfg));
  TrainingReport report;
  const AgentNetwork net = train_agent(cfg.scenario(), filter, cfg.learner(), seed, &report);
  detail::note(ctx, "trained agent: " + std::to_string(report.gradient_steps) + " gradient steps over " +
                        std::to_string(report.episodes) + " episodes");
  write_file_atomic(out, serialize_network(net.net, net.sigma, agent_metadata(cfg, seed)));
  detail::finish(ctx, started, {seed}, {out});
}

inline void cmd_train_adversary(const CommandContext& ctx, const std::string& agent_path, double eta,
                                std::uint64_t seed, const std::string& out) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be a finite value >= 0");
  const std::string started = utc_timestamp();
  const ExperimentConfig& cfg = ctx.config;
  const Agent agent = load_agent(agent_path);
  BeliefFilter filter(detail::make_model(cfg));
  TrainingReport report;
  const LearningAdversary adv =
      train_learning_adversary(cfg.scenario(), filter, agent.policy, eta, cfg.adversary_learner(), seed, &report);
  detail::note(ctx, "trained adversary: " + std::to_string(report.gradient_steps) + " gradient steps");
  write_file_atomic(out, serialize_network(adv.network.net, adv.network.sigma, adversary_metadata(cfg, seed, eta)));
  detail::finish(ctx, started, {seed}, {out});
}

inline void cmd_solve_ccpomdp(const CommandContext& ctx, const std::string& out) {
  const std::string started = utc_timestamp();
  const ExperimentConfig& cfg = ctx.config;
  BeliefFilter filter(detail::make_model(cfg));
  const BeliefGrid grid = solve_ccpomdp(cfg.cc_problem(), filter, static_cast<std::size_t>(cfg.cc_grid_size));
  write_file_atomic(out, serialize_policy(grid, config_hash(cfg)));
  detail::finish(ctx, started, {}, {out});
}

/// One metrics row for one agent against one adversary spec. `episodes` and
/// `seeds` override the config when set.
inline void cmd_evaluate(const CommandContext& ctx, const std::string& agent_path, const std::string& adversary,
                         long episodes, const std::vector<std::uint64_t>& seeds, const std::string& out) {
  const std::string started = utc_timestamp();
  const AdversarySpec spec = parse_adversary_spec(adversary);
  const Agent agent = load_agent(agent_path);
  EvaluationOptions opt = ctx.config.evaluation(ctx.workers);
  if (episodes > 0) opt.episodes = episodes;
  if (!seeds.empty()) opt.seeds = seeds;
  BeliefFilter filter(detail::make_model(ctx.config));
  const MetricsRow row = evaluate(agent, spec, filter, opt);
  write_file_atomic(out, metrics_csv({row}));
  detail::finish(ctx, started, opt.seeds, {out});
}

inline SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "eta") return SweepMode::Eta;
  if (s == "bthre") return SweepMode::BThre;
  throw ConfigError("sweep mode must be 'eta' or 'bthre', got '" + s + "'");
}

/// Every agent over the full grid of the mode. Repeated labels get a
/// numeric suffix so rows stay distinguishable.
inline void cmd_sweep(const CommandContext& ctx, SweepMode mode, const std::vector<std::string>& agent_paths,
                      std::uint64_t seed, long episodes, const std::vector<std::uint64_t>& seeds,
                      const std::string& out) {
  if (agent_paths.empty()) throw ConfigError("sweep needs at least one agent");
  const std::string started = utc_timestamp();
  std::vector<Agent> agents;
  std::map<std::string, int> seen;
  for (const auto& path : agent_paths) {
    Agent a = load_agent(path);
    const int n = seen[a.label]++;
    if (n > 0) a.label += "#" + std::to_string(n);
    agents.push_back(std::move(a));
  }
  SweepOptions opt = ctx.config.sweep(ctx.workers, seed);
  if (episodes > 0) opt.evaluation.episodes = episodes;
  if (!seeds.empty()) opt.evaluation.seeds = seeds;
  BeliefFilter filter(detail::make_model(ctx.config));
  std::vector<MetricsRow> rows;
  for (const Agent& agent : agents) {
    const auto part = sweep(agent, mode, filter, opt, [&](std::size_t g, double v) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s: point %zu (%g) done", agent.label.c_str(), g, v);
      detail::note(ctx, buf);
    });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_file_atomic(out, metrics_csv(rows));
  std::vector<std::uint64_t> manifest_seeds{seed};
  manifest_seeds.insert(manifest_seeds.end(), opt.evaluation.seeds.begin(), opt.evaluation.seeds.end());
  detail::finish(ctx, started, manifest_seeds, {out});
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

struct PlotFiles {
  std::string clap_vs_eta;
  std::string tpr_vs_eta;
  std::string tpr_vs_bthre;
  std::string up_vs_diff;
};

inline PlotFiles plot_files(const std::string& dir) {
  const std::filesystem::path d(dir);
  return {(d / "clap_vs_eta.csv").string(), (d / "tpr_vs_eta.csv").string(), (d / "tpr_vs_bthre.csv").string(),
          (d / "up_vs_diff.csv").string()};
}

/// One point per adversary configuration evaluated against both the MaxEnt
/// and the CC-POMDP agent. u_p is the mean of the two agents' values.
struct DifferencePoint {
  std::string adversary;
  std::string param_name;
  double param_value = 0.0;
  double u_p = 0.0;
  double tpr_diff = 0.0;
  double tpr_diff_stderr = 0.0;
  double clap_diff = 0.0;
  double clap_diff_stderr = 0.0;
};

inline std::vector<DifferencePoint> difference_points(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, std::string, double>;
  std::map<Key, const MetricsRow*> maxent, cc;
  for (const MetricsRow& r : rows) {
    const Key k{r.adversary, r.param_name, r.param_value};
    if (r.agent == "maxent") maxent.emplace(k, &r);
    else if (r.agent == "ccpomdp") cc.emplace(k, &r);
  }
  std::vector<DifferencePoint> out;
  for (const auto& [key, m] : maxent) {
    const auto it = cc.find(key);
    if (it == cc.end()) continue;
    const MetricsRow* c = it->second;
    DifferencePoint p;
    std::tie(p.adversary, p.param_name, p.param_value) = key;
    p.u_p = 0.5 * (m->u_p + c->u_p);
    p.tpr_diff = m->tpr_mean - c->tpr_mean;
    p.tpr_diff_stderr = std::hypot(m->tpr_stderr, c->tpr_stderr);
    p.clap_diff = m->clap_mean - c->clap_mean;
    p.clap_diff_stderr = std::hypot(m->clap_stderr, c->clap_stderr);
    if (std::isfinite(p.u_p)) out.push_back(p);
  }
  return out;
}

namespace detail {

inline std::string series(const std::vector<MetricsRow>& rows, const std::string& adversary, bool tpr) {
  std::string out = "agent,x,y,yerr\n";
  for (const MetricsRow& r : rows) {
    if (r.adversary != adversary) continue;
    const double y = tpr ? r.tpr_mean : r.clap_mean;
    const double e = tpr ? r.tpr_stderr : r.clap_stderr;
    out += r.agent + "," + format_double(r.param_value) + "," + format_double(y) + "," + format_double(e) + "\n";
  }
  return out;
}

}  // namespace detail

/// Four plot-data files in directory `out_dir`. The CSV is fully parsed and
/// checked before anything is written.
inline PlotFiles cmd_report(const CommandContext& ctx, const std::string& in_csv, const std::string& out_dir) {
  const std::string started = utc_timestamp();
  const std::vector<MetricsRow> rows = parse_metrics_csv(read_file(in_csv), in_csv);
  if (rows.empty()) throw ConfigError("metrics CSV '" + in_csv + "' has no data rows");

  std::string scatter = "adversary,param_name,param_value,u_p,tpr_diff,tpr_diff_stderr,clap_diff,clap_diff_stderr\n";
  for (const DifferencePoint& p : difference_points(rows)) {
    scatter += p.adversary + "," + p.param_name + "," + format_double(p.param_value) + "," + format_double(p.u_p) +
               "," + format_double(p.tpr_diff) + "," + format_double(p.tpr_diff_stderr) + "," +
               format_double(p.clap_diff) + "," + format_double(p.clap_diff_stderr) + "\n";
  }
  const std::string clap_eta = detail::series(rows, "learning", false);
  const std::string tpr_eta = detail::series(rows, "learning", true);
  const std::string tpr_bthre = detail::series(rows, "deceptive", true);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
  const PlotFiles files = plot_files(out_dir);
  write_file_atomic(files.clap_vs_eta, clap_eta);
  write_file_atomic(files.tpr_vs_eta, tpr_eta);
  write_file_atomic(files.tpr_vs_bthre, tpr_bthre);
  write_file_atomic(files.up_vs_diff, scatter);
  detail::finish(ctx, started, {}, {files.clap_vs_eta, files.tpr_vs_eta, files.tpr_vs_bthre, files.up_vs_diff});
  return files;
}

}  // namespace apsim
