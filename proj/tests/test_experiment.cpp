#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "apsim/experiment.hpp"

using namespace apsim;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("apsim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

CommandContext small_context() {
  CommandContext ctx;
  ctx.config.epochs = 200;
  ctx.config.warmup = 100;
  ctx.config.eval_episodes = 100;
  ctx.config.cc_grid_size = 41;
  ctx.command_line = "test";
  return ctx;
}

MetricsRow row(const std::string& agent, const std::string& adversary, const std::string& pname, double pval,
               double clap, double tpr, double up) {
  MetricsRow r;
  r.agent = agent;
  r.adversary = adversary;
  r.param_name = pname;
  r.param_value = pval;
  r.episodes = 100;
  r.clap_mean = clap;
  r.clap_stderr = 0.03;
  r.tpr_mean = tpr;
  r.tpr_stderr = 0.04;
  r.u_p = up;
  r.seeds = {0, 1};
  return r;
}

}  // namespace

TEST(Config, DefaultsArePublishedSettings) {
  const ExperimentConfig c;
  EXPECT_EQ(c.start_distance, 12);
  EXPECT_EQ(c.horizon, 10);
  EXPECT_EQ(c.gamma, 0.95);
  EXPECT_EQ(c.prior, 0.5);
  EXPECT_EQ(c.learning_rate, 5e-4);
  EXPECT_EQ(c.batch_size, 50);
  EXPECT_EQ(c.buffer_capacity, 1000000);
  EXPECT_EQ(c.epochs, 100000);
  EXPECT_EQ(c.tau, 0.01);
  EXPECT_EQ(c.sigma, 0.25);
  EXPECT_EQ(c.cc_epsilon, 0.05);
  EXPECT_EQ(c.cc_variance, 0.001);
  EXPECT_EQ(c.adversary_seeds, 10);
  EXPECT_EQ(c.eta_step, 0.25);
  EXPECT_EQ(c.eta_max, 5.0);
  EXPECT_EQ(c.bthre_step, 0.025);
  EXPECT_EQ(c.bthre_max, 0.5);
  EXPECT_EQ(c.learner().hidden, (std::vector<int>{64, 128, 64}));
}

TEST(Config, GoldenJson) {
  const std::string golden =
      R"({"adversary_epochs":20000,"adversary_seeds":10,"batch_size":50,"bthre_max":0.5,"bthre_step":0.025,)"
      R"("buffer_capacity":1000000,"cc_epsilon":0.05,"cc_grid_size":201,"cc_variance":0.001,"epochs":100000,)"
      R"("eta_max":5.0,"eta_step":0.25,"eval_episodes":10000,"eval_seeds":[0],"gamma":0.95,"horizon":10,)"
      R"("learning_rate":0.0005,"nominal_alpha":1.5,"nominal_beta":1.5,"prior":0.5,"quadrature_nodes":8,)"
      R"("sigma":0.25,"start_distance":12,"tau":0.01,"warmup":1000})";
  EXPECT_EQ(to_json(ExperimentConfig{}).dump(), golden);
  EXPECT_EQ(to_json(config_from_json(nlohmann::json::parse(golden))).dump(), golden);
}

TEST(Config, ValidationErrors) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"sigma": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"gamma": 1.0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"cc_epsilon": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"eta_step": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"sigmaa": 0.3})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"epochs": 1.5})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"gamma": "high"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"([1, 2])")), ConfigError);
  const auto c = config_from_json(nlohmann::json::parse(R"({"epochs": 20000, "eval_seeds": [3, 4]})"));
  EXPECT_EQ(c.epochs, 20000);
  EXPECT_EQ(c.eval_seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_NE(config_hash(c), config_hash(ExperimentConfig{}));
}

TEST(Config, LoadFromFile) {
  TempDir dir;
  EXPECT_THROW(load_config(dir.file("missing.json")), IoError);
  write_file_atomic(dir.file("bad.json"), "{ not json");
  EXPECT_THROW(load_config(dir.file("bad.json")), ConfigError);
  write_file_atomic(dir.file("ok.json"), R"({"horizon": 8})");
  EXPECT_EQ(load_config(dir.file("ok.json")).horizon, 8);
}

TEST(ModelFile, RoundTripIsBitExact) {
  Mlp net({3, 64, 128, 64, 3});
  Rng rng(5);
  net.randomize(rng);
  const std::string text = serialize_network(net, 0.25, agent_metadata(ExperimentConfig{}, 7));
  const LoadedNetwork loaded = parse_network(text);
  EXPECT_TRUE(loaded.net == net);
  EXPECT_EQ(loaded.sigma, 0.25);
  EXPECT_EQ(loaded.meta.seed, 7u);
  EXPECT_EQ(loaded.meta.kind, "agent");
  EXPECT_EQ(serialize_network(loaded.net, loaded.sigma, loaded.meta), text);
}

TEST(ModelFile, RejectsCorruptInput) {
  Mlp net({3, 4, 3});
  const std::string text = serialize_network(net, 0.25, agent_metadata(ExperimentConfig{}, 0));
  EXPECT_THROW(parse_network("garbage"), IoError);
  EXPECT_THROW(parse_network(text.substr(0, text.size() / 2)), IoError);
  std::string bad = text;
  bad.replace(bad.find("layers 3 4 3"), 12, "layers 3 5 3");
  EXPECT_THROW(parse_network(bad), IoError);
}

TEST(PolicyFile, RoundTripKeepsActionTable) {
  const BeliefFilter f(std::make_shared<const OpponentModel>());
  const BeliefGrid grid = solve_ccpomdp({}, f, 41);
  const BeliefGrid back = parse_policy(serialize_policy(grid, "abc"));
  EXPECT_TRUE(back == grid);
  EXPECT_EQ(back.uncertainty().epsilon, 0.05);
  EXPECT_THROW(parse_policy("apsim-ccpomdp-policy v1\ngrid_size 3\n"), IoError);
}

TEST(AdversarySpecParsing, AcceptedAndRejectedForms) {
  EXPECT_EQ(parse_adversary_spec("neutral").kind, AdversarySpec::Kind::Neutral);
  EXPECT_EQ(parse_adversary_spec("population").kind, AdversarySpec::Kind::Population);
  const auto g = parse_adversary_spec("generative:1.25,1.75");
  EXPECT_EQ(g.params.alpha, 1.25);
  EXPECT_EQ(g.params.beta, 1.75);
  EXPECT_EQ(parse_adversary_spec("deceptive:0.25").deceptive.b_thre, 0.25);
  EXPECT_THROW(parse_adversary_spec("deceptive:0.9"), ConfigError);
  EXPECT_THROW(parse_adversary_spec("deceptive:"), ConfigError);
  EXPECT_THROW(parse_adversary_spec("generative:1.5"), ConfigError);
  EXPECT_THROW(parse_adversary_spec("generative:3,1.5"), ConfigError);
  EXPECT_THROW(parse_adversary_spec("sneaky"), ConfigError);
  EXPECT_THROW(parse_adversary_spec("learning:/nonexistent/model.txt"), IoError);
}

TEST(MetricsCsv, RoundTripAndSchema) {
  const std::vector<MetricsRow> rows{row("maxent", "deceptive", "b_thre", 0.1, 2.5, 0.7, 0.01),
                                     row("ccpomdp", "neutral", "none", 0.0, 1.5, NAN, NAN)};
  const std::string csv = metrics_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "agent,adversary,param_name,param_value,episodes,clap_mean,clap_stderr,tpr_mean,tpr_stderr,u_p,seed_list");
  const auto back = parse_metrics_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], rows[0]);
  EXPECT_TRUE(std::isnan(back[1].tpr_mean));
  EXPECT_EQ(back[1].seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_THROW(parse_metrics_csv("agent,adversary\n"), ConfigError);
  EXPECT_THROW(parse_metrics_csv(std::string(kMetricsHeader) + "\nmaxent,x,y,1,2\n"), ConfigError);
  EXPECT_THROW(parse_metrics_csv(std::string(kMetricsHeader) + "\nmaxent,x,y,abc,2,1,1,1,1,1,0\n"), ConfigError);
  EXPECT_THROW(parse_metrics_csv(std::string(kMetricsHeader) + "\nmaxent,x,y,1,0,1,1,1,1,1,0\n"), ConfigError);
}

TEST(Report, EmptyCsvWritesNothing) {
  TempDir dir;
  write_file_atomic(dir.file("empty.csv"), std::string(kMetricsHeader) + "\n");
  const std::string out = dir.file("plots");
  EXPECT_THROW(cmd_report(small_context(), dir.file("empty.csv"), out), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Report, FourFilesAndHandComputedDifferences) {
  TempDir dir;
  const std::vector<MetricsRow> rows{
      row("maxent", "deceptive", "b_thre", 0.1, 2.0, 0.80, 0.02),
      row("ccpomdp", "deceptive", "b_thre", 0.1, 2.5, 0.60, 0.04),
      row("maxent", "learning", "eta", 1.0, 3.0, 0.90, 0.10),
      row("ccpomdp", "learning", "eta", 1.0, 3.5, 0.95, 0.20),
      row("maxent", "generative:1.5;1.5", "alpha", 1.5, 4.0, 0.50, 0.001),
  };
  write_file_atomic(dir.file("sweep.csv"), metrics_csv(rows));
  const PlotFiles files = cmd_report(small_context(), dir.file("sweep.csv"), dir.file("plots"));
  for (const auto& p : {files.clap_vs_eta, files.tpr_vs_eta, files.tpr_vs_bthre, files.up_vs_diff}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  EXPECT_TRUE(fs::exists(manifest_path(files.clap_vs_eta)));

  const auto points = difference_points(rows);
  ASSERT_EQ(points.size(), 2u);
  const auto& dec = points[0].adversary == "deceptive" ? points[0] : points[1];
  const auto& lrn = points[0].adversary == "deceptive" ? points[1] : points[0];
  EXPECT_NEAR(dec.tpr_diff, 0.20, 1e-15);
  EXPECT_NEAR(dec.clap_diff, -0.5, 1e-15);
  EXPECT_NEAR(dec.u_p, 0.03, 1e-15);
  EXPECT_NEAR(lrn.tpr_diff, -0.05, 1e-15);
  EXPECT_NEAR(lrn.u_p, 0.15, 1e-15);
  EXPECT_NEAR(dec.tpr_diff_stderr, std::sqrt(2 * 0.04 * 0.04), 1e-15);

  const std::string bthre = read_file(files.tpr_vs_bthre);
  EXPECT_EQ(bthre, "agent,x,y,yerr\nmaxent,0.10000000000000001,0.80000000000000004,0.040000000000000001\n"
                   "ccpomdp,0.10000000000000001,0.59999999999999998,0.040000000000000001\n");
}

TEST(Commands, SolveIsDeterministicAndReloadable) {
  TempDir dir;
  const auto ctx = small_context();
  cmd_solve_ccpomdp(ctx, dir.file("a.policy"));
  cmd_solve_ccpomdp(ctx, dir.file("b.policy"));
  EXPECT_EQ(read_file(dir.file("a.policy")), read_file(dir.file("b.policy")));
  const auto manifest = nlohmann::json::parse(read_file(manifest_path(dir.file("a.policy"))));
  EXPECT_EQ(manifest["config_hash"], config_hash(ctx.config));
  EXPECT_EQ(manifest["outputs"][0]["fnv1a"], hex64(fnv1a(read_file(dir.file("a.policy")))));
  EXPECT_EQ(load_agent(dir.file("a.policy")).label, "ccpomdp");
}

TEST(Commands, TrainAndEvaluateAreDeterministic) {
  TempDir dir;
  const auto ctx = small_context();
  cmd_train_agent(ctx, 3, dir.file("a.model"));
  cmd_train_agent(ctx, 3, dir.file("b.model"));
  EXPECT_EQ(read_file(dir.file("a.model")), read_file(dir.file("b.model")));
  EXPECT_EQ(load_agent(dir.file("a.model")).label, "maxent");

  cmd_train_adversary(ctx, dir.file("a.model"), 1.0, 2, dir.file("a.adv"));
  cmd_train_adversary(ctx, dir.file("a.model"), 1.0, 2, dir.file("b.adv"));
  EXPECT_EQ(read_file(dir.file("a.adv")), read_file(dir.file("b.adv")));
  EXPECT_THROW(load_agent(dir.file("a.adv")), IoError);

  const std::vector<std::string> specs{"neutral", "generative:1.5,1.5", "deceptive:0.25", "learning:" + dir.file("a.adv")};
  for (const std::string& spec : specs) {
    cmd_evaluate(ctx, dir.file("a.model"), spec, 50, {0, 1}, dir.file("e1.csv"));
    cmd_evaluate(ctx, dir.file("a.model"), spec, 50, {0, 1}, dir.file("e2.csv"));
    EXPECT_EQ(read_file(dir.file("e1.csv")), read_file(dir.file("e2.csv"))) << spec;
    const auto rows = parse_metrics_csv(read_file(dir.file("e1.csv")));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].episodes, 100);
  }
}

TEST(Commands, GenerativeAndNeutralRowsDiffer) {
  TempDir dir;
  const auto ctx = small_context();
  cmd_solve_ccpomdp(ctx, dir.file("cc.policy"));
  cmd_evaluate(ctx, dir.file("cc.policy"), "generative:1.5,1.5", 200, {}, dir.file("g.csv"));
  cmd_evaluate(ctx, dir.file("cc.policy"), "deceptive:0.25", 200, {}, dir.file("d.csv"));
  const auto g = parse_metrics_csv(read_file(dir.file("g.csv")));
  const auto d = parse_metrics_csv(read_file(dir.file("d.csv")));
  EXPECT_GE(d[0].tpr_mean, 0.0);
  EXPECT_LE(d[0].tpr_mean, 1.0);
  // Against a neutral opponent there are no adversary episodes, so TPR is undefined.
  cmd_evaluate(ctx, dir.file("cc.policy"), "neutral", 200, {}, dir.file("n.csv"));
  const auto n = parse_metrics_csv(read_file(dir.file("n.csv")));
  EXPECT_TRUE(std::isnan(n[0].tpr_mean));
  EXPECT_FALSE(std::isnan(g[0].tpr_mean));
}

TEST(Commands, BThreSweepOfTwoAgents) {
  TempDir dir;
  auto ctx = small_context();
  ctx.config.eval_episodes = 20;
  cmd_solve_ccpomdp(ctx, dir.file("cc.policy"));
  cmd_train_agent(ctx, 0, dir.file("a.model"));
  cmd_sweep(ctx, SweepMode::BThre, {dir.file("a.model"), dir.file("cc.policy")}, 0, 0, {}, dir.file("s.csv"));
  const auto rows = parse_metrics_csv(read_file(dir.file("s.csv")));
  EXPECT_EQ(rows.size(), 42u);
  EXPECT_THROW(parse_sweep_mode("gamma"), ConfigError);
}

TEST(AtomicWrite, ReplacesAndFailsCleanly) {
  TempDir dir;
  write_file_atomic(dir.file("x.txt"), "one");
  write_file_atomic(dir.file("x.txt"), "two");
  EXPECT_EQ(read_file(dir.file("x.txt")), "two");
  EXPECT_THROW(write_file_atomic(dir.file("no/such/dir/x.txt"), "z"), IoError);
}
