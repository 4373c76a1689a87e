#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcpo/plotting.hpp"
#include "mcpo/trainer.hpp"

using namespace mcpo;
using namespace mcpo::harness;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() /
                 (std::string("mcpo_test_") + tag + "_" +
                  std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallMcpo = R"({
  "env": "pendulum",
  "algorithm": "mcpo",
  "total_steps": 768,
  "seeds": [4],
  "horizon": 128,
  "epochs": 2,
  "minibatch_size": 64,
  "n_actors": 2,
  "hidden_size": 16,
  "memory_capacity": 3,
  "checkpoint_interval": 1,
  "out_dir": "OUT"
})";
}  // namespace

TEST_CASE("minimal config picks up the documented defaults") {
  RunConfig c = parse_config(R"({
    "env": "pendulum", "algorithm": "mcpo",
    "total_steps": 1000000, "seeds": [1, 2, 3]
  })");
  CHECK(c.horizon == 2048);
  CHECK(c.epochs == 10);
  CHECK(c.minibatch_size == 64);
  CHECK(c.gamma == doctest::Approx(0.99));
  CHECK(c.lambda == doctest::Approx(0.95));
  CHECK(c.n_actors == 4);
  CHECK(c.adam_step_size == doctest::Approx(3e-4));
  CHECK(c.objective.c1 == doctest::Approx(0.5));
  CHECK(c.objective.c2 == doctest::Approx(0.0));
  CHECK(c.mcpo.memory_capacity == 5);
  CHECK(c.mcpo.beta_min == doctest::Approx(0.01));
  CHECK(c.mcpo.beta_max == doctest::Approx(10.0));
  // every default becomes explicit in the echo
  std::string echo = c.to_json();
  for (const char* key :
       {"horizon", "epochs", "minibatch_size", "gamma", "lambda", "n_actors",
        "adam_step_size", "value_coef", "entropy_coef", "memory_capacity",
        "beta_min", "beta_max", "write_rule", "attention", "beta_mode"})
    CHECK(echo.find(key) != std::string::npos);
}

TEST_CASE("config validation names the offending key") {
  auto expect_error = [](const char* text, const char* needle) {
    try {
      parse_config(text);
      FAIL_CHECK("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error(R"({"algorithm":"mcpo","total_steps":9000,"seeds":[1]})", "env");
  expect_error(R"({"env":"pendulum","algorithm":"nope","total_steps":9000,"seeds":[1]})",
               "nope");
  expect_error(R"({"env":"pendulum","algorithm":"mcpo","total_steps":9000,"seeds":[1],"memory_capacity":0})",
               "memory_capacity");
  expect_error(R"({"env":"pendulum","algorithm":"mcpo","total_steps":9000,"seeds":[],"horizon":8})",
               "seeds");
  expect_error(R"({"env":"pendulum","algorithm":"kl-fixed","total_steps":9000,"seeds":[1],"clip_eps":0.2})",
               "clip_eps");
  expect_error(R"({"env":"pendulum","algorithm":"mcpo","total_steps":100,"seeds":[1]})",
               "total_steps");
}

TEST_CASE("json comments are accepted in configs") {
  RunConfig c = parse_config(R"({
    // which task to train on
    "env": "cartpole",
    "algorithm": "ppo-clip",
    "clip_eps": 0.3,
    "total_steps": 8192,
    "seeds": [7]
  })");
  CHECK(c.env == "cartpole");
  CHECK(c.objective.clip_eps == doctest::Approx(0.3));
}

TEST_CASE("checkpoint round trip is byte identical") {
  fs::path dir = temp_dir("ck");
  nn::NetArch arch = nn::NetArch::mlp(3, nn::PolicyHead::GaussianMean, 1, 8);
  McpoConfig mcfg;
  mcfg.memory_capacity = 3;

  Checkpoint ck;
  ck.algorithm = "mcpo";
  ck.env_id = "pendulum";
  ck.state.policy =
      make_mcpo_state(arch, nn::init_params(arch, 3), mcfg, 3e-4, 5);
  RngStream rng(17);
  for (int i = 0; i < 3; ++i) {
    Vec snap = ck.state.policy.theta;
    for (int k = 0; k < snap.size(); ++k) snap(k) += 0.01 * rng.normal();
    ck.state.policy.memory.push(std::move(snap), i);
  }
  ck.state.iteration = 12;
  ck.state.env_steps = 12 * 256;
  ck.state.episodes = 40;
  ck.state.return_window = {1.0, -2.5, 3.25};
  ck.state.episode_return_acc = {0.5, -0.25};
  ck.env_blobs = {Vec::Ones(8), 2.0 * Vec::Ones(8)};

  fs::path p1 = dir / "a.bin";
  fs::path p2 = dir / "b.bin";
  save_checkpoint(p1, ck);
  Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(loaded.state.iteration == 12);
  CHECK(loaded.state.policy.memory.size() == 3);
  CHECK(loaded.state.policy.memory.entry(0).created_at_update == 0);
  CHECK(loaded.state.policy.memory.entry(2).created_at_update == 2);
  CHECK((loaded.state.policy.theta - ck.state.policy.theta)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((*loaded.state.policy.memory.entry(1).params -
         *ck.state.policy.memory.entry(1).params)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(loaded.state.return_window == ck.state.return_window);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects corruption and wrong versions") {
  fs::path dir = temp_dir("ckbad");
  nn::NetArch arch = nn::NetArch::mlp(2, nn::PolicyHead::CategoricalLogits, 2, 4);
  Checkpoint ck;
  ck.algorithm = "ppo-clip";
  ck.env_id = "cartpole";
  ck.state.policy = make_mcpo_state(arch, nn::init_params(arch, 1),
                                    McpoConfig{}, 3e-4, 2);
  fs::path p = dir / "ck.bin";
  save_checkpoint(p, ck);

  // truncate the binary tail
  std::string bytes = slurp(p);
  std::ofstream(dir / "trunc.bin", std::ios::binary)
      << bytes.substr(0, bytes.size() - 16);
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.bin"), LoadError);

  // flip the version line
  std::string wrong = bytes;
  wrong[16] = '9';
  std::ofstream(dir / "version.bin", std::ios::binary) << wrong;
  CHECK_THROWS_AS(load_checkpoint(dir / "version.bin"), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("training runs, resumes and stays deterministic") {
  fs::path dir = temp_dir("train");
  std::string text = kSmallMcpo;
  RunConfig cfg = parse_config(text);
  cfg.out_dir = (dir / "full").string();

  SeedRunResult full = train_seed(cfg, 4, dir / "full", false, false);
  REQUIRE(full.ok);
  CHECK(full.env_steps == 768);

  // identical rerun produces a byte-identical metrics stream
  SeedRunResult rerun = train_seed(cfg, 4, dir / "rerun", false, false);
  REQUIRE(rerun.ok);
  CHECK(slurp(dir / "full" / "metrics.jsonl") ==
        slurp(dir / "rerun" / "metrics.jsonl"));

  // interrupted run: stop after 2 of 3 iterations, then resume
  RunConfig part = cfg;
  part.total_steps = 512;
  SeedRunResult half = train_seed(part, 4, dir / "resume", false, false);
  REQUIRE(half.ok);
  RunConfig rest = cfg;
  SeedRunResult done = train_seed(rest, 4, dir / "resume", true, false);
  REQUIRE(done.ok);
  CHECK(done.env_steps == 768);

  // the resumed stream continues without gaps and matches the full run
  CHECK(slurp(dir / "resume" / "metrics.jsonl") ==
        slurp(dir / "full" / "metrics.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("resume rejects a mismatched configuration") {
  fs::path dir = temp_dir("mismatch");
  RunConfig cfg = parse_config(kSmallMcpo);
  SeedRunResult r = train_seed(cfg, 4, dir / "seed", false, false);
  REQUIRE(r.ok);
  RunConfig other = cfg;
  other.hidden_size = 32;  // different architecture
  CHECK_THROWS_AS(train_seed(other, 4, dir / "seed", true, false), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("update count follows the loop arithmetic") {
  fs::path dir = temp_dir("loops");
  // 1 iteration, K=1, B = T, 1 actor: exactly one minibatch update
  RunConfig cfg = parse_config(R"({
    "env": "pendulum", "algorithm": "mcpo", "total_steps": 64,
    "seeds": [2], "horizon": 64, "epochs": 1, "minibatch_size": 64,
    "n_actors": 1, "hidden_size": 8, "memory_capacity": 2
  })");
  SeedRunResult r = train_seed(cfg, 2, dir / "one", false, false);
  REQUIRE(r.ok);
  Checkpoint ck = load_checkpoint(dir / "one" / "checkpoint.bin");
  CHECK(ck.state.policy.update_count == 1);
  CHECK(ck.state.iteration == 1);

  // 2 iterations, K=3, 100 rows with B=64 -> 2 minibatches per epoch
  RunConfig cfg2 = parse_config(R"({
    "env": "pendulum", "algorithm": "ppo-clip", "total_steps": 200,
    "seeds": [2], "horizon": 100, "epochs": 3, "minibatch_size": 64,
    "n_actors": 1, "hidden_size": 8
  })");
  SeedRunResult r2 = train_seed(cfg2, 2, dir / "two", false, false);
  REQUIRE(r2.ok);
  Checkpoint ck2 = load_checkpoint(dir / "two" / "checkpoint.bin");
  CHECK(ck2.state.policy.update_count == 2 * 3 * 2);
  fs::remove_all(dir);
}

TEST_CASE("multi-seed run writes per-seed artifacts and a summary") {
  fs::path dir = temp_dir("run");
  RunConfig cfg = parse_config(R"({
    "env": "cartpole", "algorithm": "ppo-clip", "total_steps": 512,
    "seeds": [1, 2], "horizon": 128, "epochs": 2, "minibatch_size": 64,
    "n_actors": 2, "hidden_size": 16
  })");
  cfg.out_dir = (dir / "out").string();
  fs::path root = run(cfg, false, false);
  for (int seed : {1, 2}) {
    fs::path sd = root / ("seed" + std::to_string(seed));
    CHECK(fs::exists(sd / "metrics.jsonl"));
    CHECK(fs::exists(sd / "manifest.json"));
    CHECK(fs::exists(sd / "checkpoint.bin"));
    CHECK(fs::exists(sd / "timing.jsonl"));
    // the manifest echoes the fully defaulted config
    std::string manifest = slurp(sd / "manifest.json");
    CHECK(manifest.find("\"gamma\": 0.99") != std::string::npos);
    CHECK(manifest.find("\"clip_eps\": 0.2") != std::string::npos);
  }
  std::string summary = slurp(root / "summary.csv");
  CHECK(summary.find("seed,status,final_return_mean_100") != std::string::npos);
  CHECK(summary.find("1,ok,") != std::string::npos);
  CHECK(summary.find("2,ok,") != std::string::npos);
  CHECK(summary.find("aggregate,2_seeds,") != std::string::npos);
  CHECK(summary.find("±") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("eval runs a saved checkpoint") {
  fs::path dir = temp_dir("eval");
  RunConfig cfg = parse_config(kSmallMcpo);
  SeedRunResult r = train_seed(cfg, 4, dir / "seed", false, false);
  REQUIRE(r.ok);
  EvalResult e = evaluate_checkpoint(dir / "seed" / "checkpoint.bin", 3, 9);
  CHECK(e.episodes == 3);
  CHECK(std::isfinite(e.mean_return));
  CHECK(e.mean_return < 0.0);  // pendulum returns are non-positive
  fs::remove_all(dir);
}

TEST_CASE("metrics records serialize deterministically") {
  MetricsRecord rec;
  rec.iteration = 3;
  rec.env_steps = 768;
  rec.return_mean_100 = -123.456;
  std::string a = rec.to_json_line();
  std::string b = rec.to_json_line();
  CHECK(a == b);
  CHECK(a.find("\"env_steps\":768") != std::string::npos);

  MetricsRecord empty;
  CHECK(empty.to_json_line().find("\"return_mean_100\":null") !=
        std::string::npos);
}

TEST_CASE("plot aggregates runs into csv and svg") {
  fs::path dir = temp_dir("plot");
  // two synthetic metric streams on the same grid
  for (int run = 0; run < 2; ++run) {
    std::ofstream out(dir / ("m" + std::to_string(run) + ".jsonl"));
    for (int i = 1; i <= 5; ++i) {
      MetricsRecord rec;
      rec.iteration = i;
      rec.env_steps = 100 * i;
      rec.return_mean_100 = run == 0 ? i : 3.0 * i;
      out << rec.to_json_line() << "\n";
    }
  }
  std::vector<std::string> files = {(dir / "m0.jsonl").string(),
                                    (dir / "m1.jsonl").string()};
  plot(files, "return_mean_100", (dir / "curve.svg").string());

  std::string csv = slurp(dir / "curve.svg.csv");
  CHECK(csv.find("env_steps,mean,std,n") != std::string::npos);
  CHECK(csv.find("500,10,5,2") != std::string::npos);  // mean of 5 and 15
  std::string svg = slurp(dir / "curve.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  // single run: the band collapses onto the line
  plot({files[0]}, "return_mean_100", (dir / "one.svg").string());
  std::string one_csv = slurp(dir / "one.svg.csv");
  CHECK(one_csv.find("500,5,0,1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("identical runs give a zero-width band") {
  fs::path dir = temp_dir("band");
  for (int run = 0; run < 5; ++run) {
    std::ofstream out(dir / ("m" + std::to_string(run) + ".jsonl"));
    for (int i = 1; i <= 4; ++i) {
      MetricsRecord rec;
      rec.iteration = i;
      rec.env_steps = 50 * i;
      rec.return_mean_100 = 2.5 * i;
      out << rec.to_json_line() << "\n";
    }
  }
  std::vector<std::string> files;
  for (int run = 0; run < 5; ++run)
    files.push_back((dir / ("m" + std::to_string(run) + ".jsonl")).string());
  Aggregate agg = aggregate_series([&] {
    std::vector<Series> rs;
    for (const auto& f : files) rs.push_back(read_metric_series(f, "return_mean_100"));
    return rs;
  }());
  for (double s : agg.stddev) CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(agg.n == 5);
  fs::remove_all(dir);
}

TEST_CASE("mismatched grids are resampled onto a common grid") {
  fs::path dir = temp_dir("grid");
  {
    std::ofstream out(dir / "a.jsonl");
    for (int i = 1; i <= 6; ++i) {
      MetricsRecord rec;
      rec.env_steps = 100 * i;
      rec.return_mean_100 = i;
      out << rec.to_json_line() << "\n";
    }
  }
  {
    std::ofstream out(dir / "b.jsonl");
    for (int i = 1; i <= 4; ++i) {
      MetricsRecord rec;
      rec.env_steps = 150 * i;
      rec.return_mean_100 = i;
      out << rec.to_json_line() << "\n";
    }
  }
  std::vector<Series> rs = {read_metric_series((dir / "a.jsonl").string(),
                                               "return_mean_100"),
                            read_metric_series((dir / "b.jsonl").string(),
                                               "return_mean_100")};
  Aggregate agg = aggregate_series(rs);
  CHECK(agg.n == 2);
  REQUIRE(!agg.x.empty());
  CHECK(agg.x.front() >= 150.0);
  CHECK(agg.x.back() <= 600.0);
  fs::remove_all(dir);
}
