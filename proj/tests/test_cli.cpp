#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "metairl/metairl.hpp"

namespace fs = std::filesystem;

namespace metairl {
namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "metairl");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("metairl_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string make_world(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"gen-world", "--out", path(name)};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  std::string make_demos(const std::string& world, const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"gen-demos", "--world", world, "--out", path(name)};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  fs::path dir_;
};

TEST_F(CliTest, GenWorldIsDeterministicWithDocumentedDefaults) {
  const auto a = make_world("a.json", {"--seed", "7"});
  const auto b = make_world("b.json", {"--seed", "7"});
  EXPECT_EQ(read_text_file(a), read_text_file(b));
  const WorldFile w = read_world(a);
  EXPECT_EQ(w.terrain.width, 8u);
  EXPECT_EQ(w.terrain.height, 8u);
  EXPECT_EQ(w.terrain.hills.size(), 3u);
  EXPECT_EQ(w.tasks.size(), 10u);
  const auto r = run_cli({"gen-world", "--seed", "7", "--out", path("c.json")});
  EXPECT_NE(r.out.find("config_hash "), std::string::npos);
  EXPECT_NE(r.out.find(path("c.json")), std::string::npos);
}

TEST_F(CliTest, FlatWorldIsReportedByInspect) {
  const auto w = make_world("flat.json", {"--hills", "0", "--width", "5", "--height", "4", "--tasks", "3"});
  const auto r = run_cli({"inspect", "--world", w});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("flat true"), std::string::npos);
  EXPECT_NE(r.out.find("size 5x4"), std::string::npos);
  EXPECT_NE(r.out.find("tasks 3"), std::string::npos);
  const auto hilly = run_cli({"inspect", "--world", make_world("hilly.json")});
  EXPECT_NE(hilly.out.find("flat false"), std::string::npos);
}

TEST_F(CliTest, UsageAndIoErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"gen-world"}).code, 2);
  EXPECT_EQ(run_cli({"gen-world", "--width", "1", "--out", path("x.json")}).code, 2);
  EXPECT_EQ(run_cli({"gen-world", "--width", "abc", "--out", path("x.json")}).code, 2);
  EXPECT_EQ(run_cli({"gen-world", "--tasks", "100", "--out", path("x.json")}).code, 2);
  EXPECT_EQ(run_cli({"gen-world", "--out", path("no/such/dir/x.json")}).code, 1);
  EXPECT_EQ(run_cli({"gen-demos", "--world", path("missing.json"), "--out", path("d.csv")}).code, 1);
  EXPECT_EQ(run_cli({"train", "--world", path("missing.json"), "--demos", path("d.csv"), "--out-dir", path("c")}).code,
            1);
  EXPECT_EQ(run_cli({"train", "--loss", "kl", "--world", "w", "--demos", "d", "--out-dir", "c"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, GenDemosRowCountsAndDeterminism) {
  const auto w = make_world("w.json", {"--seed", "3", "--width", "5", "--height", "5", "--tasks", "3"});
  const auto empty = make_demos(w, "empty.csv", {"--n-traj", "0"});
  EXPECT_EQ(read_text_file(empty), std::string(kDemoHeader) + "\n");
  const auto a = make_demos(w, "a.csv", {"--n-traj", "4", "--seed", "5"});
  const auto b = make_demos(w, "b.csv", {"--n-traj", "4", "--seed", "5"});
  const std::string text = read_text_file(a);
  EXPECT_EQ(text, read_text_file(b));
  const WorldFile world = read_world(w);
  const DemoSet demos = demos_from_string(text, world.terrain, world.tasks);
  std::size_t rows = 0;
  for (const auto& bucket : demos.per_task)
    for (const auto& t : bucket) rows += t.steps.size();
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines - 1, rows);
  const auto r = run_cli({"gen-demos", "--world", w, "--n-traj", "4", "--seed", "5", "--out", path("c.csv")});
  EXPECT_NE(r.out.find("rows " + std::to_string(rows)), std::string::npos);
}

TEST_F(CliTest, TrainWithZeroIterationsWritesInitialCheckpoints) {
  const auto w = make_world("w.json", {"--width", "4", "--height", "4", "--tasks", "2"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "2"});
  const auto r = run_cli({"train", "--world", w, "--demos", d, "--iters", "0", "--seed", "9", "--out-dir", path("ck")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(path("ck/train_log.csv")), "iter,objective,irl_term,sharing_term\n");
  const Arch arch{2, {64, 32}, Activation::Tanh};
  EXPECT_EQ(params_from_string(read_text_file(path("ck/task_1.json"))), init_params(arch, task_init_seed(9, 1)));
  EXPECT_EQ(params_from_string(read_text_file(path("ck/baseline.json"))), init_params(arch, baseline_init_seed(9)));
  const Json manifest = Json::parse(read_text_file(path("ck/manifest.json")));
  EXPECT_EQ(manifest["iteration"], 0);
  EXPECT_TRUE(manifest["objective"].is_null());
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST_F(CliTest, TrainLogHasOneRowPerIteration) {
  const auto w = make_world("w.json", {"--width", "3", "--height", "3", "--tasks", "2"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "2"});
  const auto r = run_cli({"train", "--world", w, "--demos", d, "--iters", "12", "--tol", "0", "--hidden", "8",
                          "--out-dir", path("ck")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = read_text_file(path("ck/train_log.csv"));
  std::size_t lines = 0;
  for (char c : log) lines += c == '\n';
  EXPECT_EQ(lines, 13u);
  const Json manifest = Json::parse(read_text_file(path("ck/manifest.json")));
  EXPECT_EQ(manifest["iteration"], 12);
  EXPECT_TRUE(manifest["objective"].is_number());
}

TEST_F(CliTest, NoneEqualsL2WithZeroWeight) {
  const auto w = make_world("w.json", {"--width", "4", "--height", "4", "--tasks", "3", "--seed", "2"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "2"});
  const std::vector<std::string> common = {"train", "--world", w, "--demos", d, "--iters", "40", "--seed", "5",
                                           "--hidden", "16,8"};
  auto a = common;
  a.insert(a.end(), {"--loss", "none", "--out-dir", path("none")});
  auto b = common;
  b.insert(b.end(), {"--loss", "l2", "--lambda", "0", "--out-dir", path("l2")});
  ASSERT_EQ(run_cli(a).code, 0);
  ASSERT_EQ(run_cli(b).code, 0);
  for (const std::string f : {"task_0.json", "task_1.json", "task_2.json", "baseline.json", "train_log.csv"})
    EXPECT_EQ(read_text_file(path("none/" + f)), read_text_file(path("l2/" + f))) << f;
}

TEST_F(CliTest, CheckGradsPassesOnSmallWorld) {
  const auto w = make_world("w.json", {"--width", "3", "--height", "3", "--tasks", "2"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "1"});
  const auto r = run_cli({"train", "--world", w, "--demos", d, "--iters", "10", "--check-grads", "--backup", "lse",
                          "--out-dir", path("ck")});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, NonFiniteLossExitsThreeWithIteration) {
  const auto w = make_world("w.json", {"--width", "3", "--height", "3", "--tasks", "2"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "2"});
  const auto r = run_cli({"train", "--world", w, "--demos", d, "--iters", "50", "--lr", "1e300", "--b", "1e300",
                          "--out-dir", path("ck")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("iteration "), std::string::npos);
}

TEST_F(CliTest, TrainRejectsDemosInconsistentWithWorld) {
  const auto w = make_world("w.json", {"--width", "3", "--height", "3", "--tasks", "1"});
  const std::string csv = std::string(kDemoHeader) + "\n0,0,0,0,0,3\n0,0,1,2,2,0\n";
  write_text_file(path("bad.csv"), csv);
  EXPECT_EQ(run_cli({"train", "--world", w, "--demos", path("bad.csv"), "--out-dir", path("ck")}).code, 1);
}

TEST_F(CliTest, EvalOfOracleCheckpointsIsPerfect) {
  const auto w = make_world("w.json", {"--width", "5", "--height", "5", "--tasks", "4", "--seed", "11"});
  const WorldFile world = read_world(w);
  fs::create_directories(path("ck"));
  const Arch arch{world.terrain.n_cells(), {}, Activation::Tanh};
  for (std::size_t i = 0; i < world.tasks.size(); ++i) {
    const Mdp mdp = world.task_mdp(i);
    const auto v = value_iteration(mdp, {}, 1e-12).v;
    VrParams p(arch);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) p.weights(0)[s] = mdp.reward()[s] + mdp.gamma() * v[s];
    write_text_file(path("ck/task_" + std::to_string(i) + ".json"), params_to_string(p));
  }
  write_text_file(path("ck/manifest.json"), R"({"backup": "max", "k": 1.0, "features": "onehot"})");
  const auto r = run_cli({"eval", "--world", w, "--checkpoints", path("ck"), "--out", path("eval.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(read_text_file(path("eval.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "task_id,correlation,status");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    EXPECT_EQ(line.substr(c2 + 1), "ok");
    EXPECT_NEAR(std::stod(line.substr(c1 + 1, c2 - c1 - 1)), 1.0, 1e-9);
    ++rows;
  }
  EXPECT_EQ(rows, world.tasks.size());
}

TEST_F(CliTest, EvalNamesMissingCheckpoint) {
  const auto w = make_world("w.json", {"--width", "4", "--height", "4", "--tasks", "3"});
  const auto d = make_demos(w, "d.csv", {"--n-traj", "1"});
  ASSERT_EQ(run_cli({"train", "--world", w, "--demos", d, "--iters", "2", "--out-dir", path("ck")}).code, 0);
  const auto ok = run_cli({"eval", "--world", w, "--checkpoints", path("ck"), "--out", path("e.csv")});
  ASSERT_EQ(ok.code, 0) << ok.err;
  fs::remove(path("ck/task_2.json"));
  const auto r = run_cli({"eval", "--world", w, "--checkpoints", path("ck"), "--out", path("e2.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("task_2.json"), std::string::npos);
}

TEST_F(CliTest, SweepOutputsIndependentOfJobs) {
  write_text_file(path("tiny.json"), R"({
    "terrain": {"width": 5, "height": 5},
    "train": {"max_iters": 60, "hidden": [16, 8]},
    "sweep": {"n_worlds": 1, "task_counts": [1, 2], "traj_counts": [1, 2], "loss_kinds": ["none", "huber"]}
  })");
  const auto a = run_cli({"sweep", "--config", path("tiny.json"), "--jobs", "1", "--out-dir", path("j1")});
  const auto b = run_cli({"sweep", "--config", path("tiny.json"), "--jobs", "8", "--out-dir", path("j8")});
  const auto c = run_cli({"sweep", "--config", path("tiny.json"), "--jobs", "1", "--out-dir", path("again")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  ASSERT_EQ(c.code, 0) << c.err;
  const std::string results = read_text_file(path("j1/results.csv"));
  EXPECT_EQ(results, read_text_file(path("j8/results.csv")));
  EXPECT_EQ(results, read_text_file(path("again/results.csv")));
  EXPECT_EQ(read_text_file(path("j1/aggregate.csv")), read_text_file(path("j8/aggregate.csv")));
  EXPECT_EQ(results.substr(0, kResultsHeader.size()), kResultsHeader);
  EXPECT_TRUE(fs::exists(path("j1/panel_1.svg")));
  EXPECT_TRUE(fs::exists(path("j1/panel_2.svg")));
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(path("j1"))) svgs += e.path().extension() == ".svg";
  EXPECT_EQ(svgs, 2u);
  EXPECT_NE(a.out.find("records 12"), std::string::npos);
}

}  // namespace
}  // namespace metairl
