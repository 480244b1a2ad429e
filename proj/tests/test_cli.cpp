#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "resrl/group_io.hpp"
#include "resrl/pipeline.hpp"
#include "resrl/random.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "resrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = resrl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("resrl_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Json> jsonl(const std::string& text) {
  std::vector<Json> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(Json::parse(line));
  }
  return rows;
}

resrl::PromptGroup random_group(const std::string& id, std::vector<double> rewards, resrl::Rng& rng) {
  resrl::PromptGroup g;
  g.prompt_id = id;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    resrl::Trajectory t;
    t.reward = rewards[i];
    for (int p = 0; p < 5; ++p) {
      resrl::TokenRecord tok;
      tok.traj = static_cast<int>(i);
      tok.position = p;
      tok.hidden = Eigen::VectorXd(6);
      for (int k = 0; k < 6; ++k) tok.hidden(k) = rng.normal();
      tok.valid = p != 3 || i != 1;
      tok.old_logprob = -1.0;
      t.tokens.push_back(tok);
    }
    g.trajectories.push_back(t);
  }
  return g;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Training flags small enough for a unit test.
std::vector<std::string> small_train(const std::string& out_dir) {
  return {"train",          "--output_dir",    out_dir, "--modulus",      "5",  "--max_len",
          "5",              "--embed_dim",     "4",     "--recurrent_dim", "8",  "--hidden_dim",
          "6",              "--warmup_steps",  "200",   "--prompts_per_step", "3", "--probe_size",
          "5",              "--eval_prompts",  "8",     "--steps",        "10"};
}

}  // namespace

TEST_F(CliTest, NoSubcommandIsUsageError) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, ReweightEmptyInput) {
  write_file(path("empty.jsonl"), "");
  const auto r = run({"reweight", "--input", path("empty.jsonl"), "--output_dir", dir_.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("reweight.jsonl")), "");
  EXPECT_TRUE(fs::exists(path("reweight.config.json")));
}

TEST_F(CliTest, ReweightMatchesLibrary) {
  resrl::Rng rng(1);
  std::vector<resrl::PromptGroup> groups = {random_group("a", {1, 0, 0, 1}, rng),
                                            random_group("b", {0, 0, 0, 1}, rng)};
  {
    std::ofstream out(path("groups.jsonl"));
    resrl::write_groups(out, groups);
  }
  const auto r = run({"reweight", "--input", path("groups.jsonl"), "--output", "-", "--rank", "2",
                      "--seed", "3", "--output_dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = jsonl(r.out);

  resrl::GatingConfig cfg;
  cfg.rank = 2;
  std::size_t expected_rows = 0;
  std::map<std::tuple<std::string, int, int>, double> expected;
  for (const auto& raw : groups) {
    const auto g = resrl::normalize_advantages(raw, cfg.std_floor);
    const auto rw = resrl::reweight_group(g, cfg, resrl::Mode::kResrl, 3);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t t = 0; t < g.trajectories[i].length(); ++t) {
        if (!g.trajectories[i].tokens[t].valid) continue;
        ++expected_rows;
        expected[{g.prompt_id, static_cast<int>(i), static_cast<int>(t)}] = rw.coefficients.values[i][t];
      }
    }
  }
  ASSERT_EQ(rows.size(), expected_rows);
  for (const auto& row : rows) {
    const auto key = std::make_tuple(row["prompt_id"].get<std::string>(), row["traj"].get<int>(), row["pos"].get<int>());
    ASSERT_TRUE(expected.count(key));
    EXPECT_EQ(row["A_tilde"].get<double>(), expected[key]);
    if (row["A_tilde"].get<double>() > 0) {
      EXPECT_TRUE(row["R"].is_null());
      EXPECT_TRUE(row["omega"].is_null());
    } else {
      ASSERT_TRUE(row["omega"].is_number());
      EXPECT_GE(row["omega"].get<double>(), 0.1);
      EXPECT_LE(row["omega"].get<double>(), 1.0);
      EXPECT_GE(row["R"].get<double>(), 0.0);
    }
  }
}

TEST_F(CliTest, ReweightFixtureMatchesAnchoredCoefficients) {
  {
    std::ofstream out(path("fixture.jsonl"));
    resrl::write_groups(out, {resrl::test::group_with_rewards({1, 0, 0, 0}, 3)});
  }
  const auto r = run({"reweight", "--input", path("fixture.jsonl"), "--output", "-", "--rank", "2",
                      "--output_dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = jsonl(r.out);
  ASSERT_EQ(rows.size(), 12u);
  const double a_pos = 1.7320508075688772, a_neg = -0.57735026918962573;
  for (const auto& row : rows) {
    if (row["traj"] == 0) {
      EXPECT_NEAR(row["A_tilde"].get<double>(), 0.1 * a_pos, 1e-12);
    } else {
      const double omega = row["omega"].get<double>();
      EXPECT_GE(omega, 0.1);
      EXPECT_LE(omega, 1.0);
      EXPECT_NEAR(row["A_tilde"].get<double>(), omega * a_neg, 1e-12);
    }
  }
}

TEST_F(CliTest, ReweightNoPositivesPassesThrough) {
  resrl::Rng rng(2);
  {
    std::ofstream out(path("flat.jsonl"));
    resrl::write_groups(out, {random_group("flat", {0, 0, 0, 0}, rng)});
  }
  const auto r = run({"reweight", "--input", path("flat.jsonl"), "--output", "-", "--output_dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = jsonl(r.out);
  ASSERT_EQ(rows.size(), 19u);
  for (const auto& row : rows) EXPECT_EQ(row["A_tilde"].get<double>(), 0.0);
}

TEST_F(CliTest, ReweightMalformedInputReportsLine) {
  write_file(path("bad.jsonl"),
             "{\"prompt_id\":\"p\",\"traj\":0,\"pos\":0,\"hidden\":[1,2],\"mask\":1,\"tail\":0,\"old_logprob\":0}\n"
             "\n"
             "{not json\n");
  const auto r = run({"reweight", "--input", path("bad.jsonl"), "--output_dir", dir_.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.jsonl:3:"), std::string::npos) << r.err;
  EXPECT_EQ(run({"reweight", "--output_dir", dir_.string()}).code, 2);
  EXPECT_EQ(run({"reweight", "--input", path("missing.jsonl"), "--output_dir", dir_.string()}).code, 2);
}

TEST_F(CliTest, VerifyPassesAndIsDeterministic) {
  const std::vector<std::string> base = {"verify", "--bound_trials", "2000", "--proxy_tokens", "128",
                                         "--bootstrap", "100", "--output_dir", dir_.string()};
  auto args = base;
  args.insert(args.end(), {"--report", path("a.json")});
  ASSERT_EQ(run(args).code, 0);
  args = base;
  args.insert(args.end(), {"--report", path("b.json")});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const Json report = Json::parse(slurp(path("a.json")));
  EXPECT_EQ(report["alignment_violations"], 0);
  EXPECT_EQ(report["proxy_violations"], 0);
  EXPECT_LT(report["lemma1_max_rel_err"].get<double>(), 1e-10);
  EXPECT_GE(report["lld_bridge_order"].get<double>(), 1.8);
  EXPECT_LE(report["lld_bridge_order"].get<double>(), 2.2);
  EXPECT_LT(report["proxy_correlation"].get<double>(), 0.0);
  EXPECT_TRUE(report["bench_table"].empty());
}

TEST_F(CliTest, VerifyProjectorFaultFails) {
  const auto r = run({"verify", "--bound_trials", "2000", "--proxy_tokens", "64", "--bootstrap", "50",
                      "--projector_fault", "--output_dir", dir_.string()});
  EXPECT_EQ(r.code, 1);
  const Json report = Json::parse(slurp(path("theory_report.json")));
  EXPECT_GT(report["alignment_violations"].get<int>(), 0);
}

TEST_F(CliTest, TrainSmokeAndSeedRepeat) {
  auto a = small_train((dir_ / "a").string());
  auto b = small_train((dir_ / "b").string());
  a.insert(a.end(), {"--save_every", "5"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  const std::string stream = slurp(path("a/metrics.jsonl"));
  EXPECT_EQ(jsonl(stream).size(), 10u);
  EXPECT_EQ(stream, slurp(path("b/metrics.jsonl")));
  EXPECT_TRUE(fs::exists(path("a/snapshot_step5.bin")));
  EXPECT_TRUE(fs::exists(path("a/snapshot_step10.bin")));
  EXPECT_FALSE(fs::exists(path("b/snapshot_step10.bin")));
}

TEST_F(CliTest, TrainGrpoEquivalence) {
  auto grpo = small_train((dir_ / "g").string());
  grpo.insert(grpo.end(), {"--mode", "grpo"});
  auto resrl_unit = small_train((dir_ / "r").string());
  resrl_unit.insert(resrl_unit.end(), {"--mode", "resrl", "--xi", "1", "--lambda_pos", "1"});
  ASSERT_EQ(run(grpo).code, 0);
  ASSERT_EQ(run(resrl_unit).code, 0);
  auto g = jsonl(slurp(path("g/metrics.jsonl")));
  auto r = jsonl(slurp(path("r/metrics.jsonl")));
  ASSERT_EQ(g.size(), r.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i].erase("mode");
    r[i].erase("mode");
    EXPECT_EQ(g[i].dump(), r[i].dump());
  }
}

TEST_F(CliTest, ConfigEchoRoundTrips) {
  auto args = small_train((dir_ / "a").string());
  args.insert(args.end(), {"--seed", "7", "--lr", "0.02"});
  ASSERT_EQ(run(args).code, 0);
  const Json echo = Json::parse(slurp(path("a/train.config.json")));
  EXPECT_EQ(echo["seed"], 7);
  EXPECT_EQ(echo["train"]["lr"], 0.02);
  EXPECT_EQ(echo["train"]["modulus"], 5);
  ASSERT_EQ(run({"train", "--config", path("a/train.config.json"), "--output_dir", path("b")}).code, 0);
  EXPECT_EQ(slurp(path("a/metrics.jsonl")), slurp(path("b/metrics.jsonl")));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  write_file(path("cfg.json"), R"({"seed": 4, "train": {"steps": 3, "lr": 0.5}, "verify": {"bound_trials": 10}})");
  auto args = small_train((dir_ / "a").string());
  args.insert(args.end(), {"--config", path("cfg.json"), "--lr", "0.01"});
  ASSERT_EQ(run(args).code, 0);
  const Json echo = Json::parse(slurp(path("a/train.config.json")));
  EXPECT_EQ(echo["seed"], 4);
  EXPECT_EQ(echo["train"]["steps"], 10);  // flag
  EXPECT_EQ(echo["train"]["lr"], 0.01);   // flag
  EXPECT_FALSE(echo.contains("verify"));
}

TEST_F(CliTest, ConfigErrorsAreUsageErrors) {
  write_file(path("unknown.json"), R"({"train": {"stepz": 3}})");
  write_file(path("section.json"), R"({"trian": {}})");
  write_file(path("type.json"), R"({"train": {"steps": "many"}})");
  write_file(path("unsigned.json"), R"({"gating": {"rank": -1}})");
  write_file(path("broken.json"), "{");
  for (const char* f : {"unknown.json", "section.json", "type.json", "unsigned.json", "broken.json"}) {
    const auto r = run({"train", "--config", path(f), "--output_dir", dir_.string()});
    EXPECT_EQ(r.code, 2) << f;
    EXPECT_FALSE(r.err.empty()) << f;
  }
  EXPECT_EQ(run({"train", "--config", path("nope.json")}).code, 2);
  EXPECT_EQ(run({"train", "--steps", "1.5", "--output_dir", dir_.string()}).code, 2);
  EXPECT_EQ(run({"train", "--mode", "sgd", "--output_dir", dir_.string()}).code, 2);
  EXPECT_EQ(run({"train", "--group_size", "1", "--output_dir", dir_.string()}).code, 2);
  EXPECT_EQ(run({"bench", "--sizes", "1,2", "--output_dir", dir_.string()}).code, 2);
}

TEST_F(CliTest, OutputDirFromEnvironment) {
  ::setenv("RESRL_OUTPUT_DIR", path("env").c_str(), 1);
  const auto r = run({"bench", "--sizes", "64,64,16,2,0", "--repeats", "1", "--min_sample_seconds", "0"});
  ::unsetenv("RESRL_OUTPUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("env/bench.csv")));
}

TEST_F(CliTest, BenchSingleSizeHasOneRowAndNoFit) {
  const auto r = run({"bench", "--sizes", "64,64,16,2,0", "--repeats", "1", "--min_sample_seconds", "0",
                      "--output_dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(path("bench.csv")));
  std::vector<std::string> lines;
  for (std::string line; std::getline(csv, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "method,M,T_neg,d,k,vocab_star,wall_time");
  EXPECT_EQ(lines[1].rfind("resrl,64,64,16,2,0,", 0), 0u);
}
