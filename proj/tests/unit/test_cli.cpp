// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gob/cli/commands.hpp"
#include "gob/cli/config.hpp"
#include "gob/error.hpp"
#include "gob/trainer/checkpoint.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace gob;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome gob_run(std::vector<std::string> args) {
  args.insert(args.begin(), "gob");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gob_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("help is available for every subcommand and lists its flags") {
  const Outcome top = gob_run({"--help"});
  CHECK(top.code == cli::kExitOk);
  const std::vector<std::pair<std::string, std::vector<std::string>>> expect = {
      {"generate", {"--setting", "--n", "--seed", "--out"}},
      {"train", {"--data", "--out", "--learning-rate", "--weight-decay", "--dropout", "--epochs",
                 "--hidden", "--jump", "--cell", "--propagation", "--solver", "--dt"}},
      {"evaluate", {"--checkpoint", "--data", "--t-split", "--threads"}},
      {"forecast", {"--checkpoint", "--series-id", "--t-cond", "--t-end", "--query-step"}},
      {"gradcheck", {"--hidden", "--seed"}},
      {"solvercmp", {"--checkpoint", "--target-error", "--t-end"}},
  };
  for (const auto& [cmd, flags] : expect) {
    CHECK(top.out.find(cmd) != std::string::npos);
    const Outcome h = gob_run({cmd, "--help"});
    CAPTURE(cmd);
    CHECK(h.code == cli::kExitOk);
    CHECK(h.out.find("--config") != std::string::npos);
    for (const auto& f : flags) {
      CAPTURE(f);
      CHECK(h.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("usage errors exit 1 and runtime errors exit 2") {
  TempDir dir;
  CHECK(gob_run({}).code == cli::kExitUsage);
  CHECK(gob_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(gob_run({"generate", "--bogus", "1"}).code == cli::kExitUsage);
  CHECK(gob_run({"generate", "--setting", "lorenz", "--out", dir / "x.csv"}).code ==
        cli::kExitUsage);
  CHECK(gob_run({"generate", "--n", "abc", "--out", dir / "x.csv"}).code == cli::kExitUsage);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "# comment\nseed = 3\nnot_a_key = 1\n";
  }
  const Outcome bad = gob_run({"generate", "--config", dir / "bad.cfg", "--out", dir / "x.csv"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("not_a_key") != std::string::npos);
  CHECK(bad.err.find(":3") != std::string::npos);
  const Outcome missing = gob_run({"evaluate", "--checkpoint", dir / "none.ckpt", "--data",
                                   dir / "none.csv"});
  CHECK(missing.code == cli::kExitRuntime);
  CHECK(!missing.err.empty());
}

TEST_CASE("run configuration parses, type-checks and tracks explicit keys") {
  cli::RunConfig c;
  c.set("learning_rate", "1e-4");
  c.set("jump", "seq");
  c.set("batch_timeline", "true");
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.model.jump == grubayes::JumpVariant::seq);
  CHECK(c.train.batch_timeline);
  CHECK(c.is_set("jump"));
  CHECK(!c.is_set("dt"));
  CHECK(c.get("learning_rate") == "0.0001");
  CHECK_THROWS_AS(c.set("epochs", "-3"), ConfigError);
  CHECK_THROWS_AS(c.set("dt", "fast"), ConfigError);
  CHECK_THROWS_AS(c.set("nope", "1"), ConfigError);
  CHECK(cli::flag_name("t_split") == "--t-split");
  for (const auto& k : cli::RunConfig::keys()) CHECK(!std::string(k.help).empty());
}

TEST_CASE("end-to-end pipeline is reproducible") {
  TempDir dir;
  const auto gen = [&](const std::string& name, const std::string& seed) {
    return gob_run({"generate", "--setting", "random_r", "--n", "40", "--seed", seed, "--out",
                    dir / name});
  };
  REQUIRE(gen("a.csv", "1").code == cli::kExitOk);
  REQUIRE(gen("b.csv", "1").code == cli::kExitOk);
  REQUIRE(gen("test.csv", "2").code == cli::kExitOk);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv.meta") == slurp(dir / "b.csv.meta"));
  CHECK(slurp(dir / "a.csv").rfind("id,time,v1,v2,m1,m2\n", 0) == 0);
  CHECK(slurp(dir / "a.csv.meta").find("setting=random_r") != std::string::npos);

  {
    std::ofstream cfg(dir / "train.cfg");
    cfg << "hidden = 6\nepochs = 2\nbatch_size = 10\nlearning_rate = 0.01\nseed = 4\n";
  }
  const auto train = [&](const std::string& out) {
    return gob_run({"train", "--config", dir / "train.cfg", "--data", dir / "a.csv", "--out",
                    dir / out});
  };
  const Outcome t1 = train("m1.ckpt");
  REQUIRE(t1.code == cli::kExitOk);
  CHECK(t1.out.find("epoch 2") != std::string::npos);
  REQUIRE(train("m2.ckpt").code == cli::kExitOk);
  CHECK(slurp(dir / "m1.ckpt") == slurp(dir / "m2.ckpt"));
  CHECK(slurp(dir / "m1.ckpt.history.csv") == slurp(dir / "m2.ckpt.history.csv"));
  CHECK(slurp(dir / "m1.ckpt.history.csv").rfind("epoch,train_loss,val_negll\n", 0) == 0);
  const auto ck = trainer::load_checkpoint(dir / "m1.ckpt");
  CHECK(ck.model.spec.hidden == 6);
  CHECK(ck.train.epochs == 2);

  const auto eval = [&](const std::string& out, const std::string& threads) {
    return gob_run({"evaluate", "--checkpoint", dir / "m1.ckpt", "--data", dir / "test.csv",
                    "--out", dir / out, "--threads", threads});
  };
  const Outcome e1 = eval("e1.csv", "1");
  REQUIRE(e1.code == cli::kExitOk);
  CHECK(e1.out.find("mse") != std::string::npos);
  CHECK(e1.out.find("negll") != std::string::npos);
  REQUIRE(eval("e2.csv", "2").code == cli::kExitOk);
  CHECK(slurp(dir / "e1.csv") == slurp(dir / "e2.csv"));

  const Outcome f = gob_run({"forecast", "--checkpoint", dir / "m1.ckpt", "--data",
                             dir / "test.csv", "--series-id", "3", "--t-cond", "0", "--t-end",
                             "2", "--query-step", "0.5", "--out", dir / "f.csv"});
  REQUIRE(f.code == cli::kExitOk);
  std::istringstream rows(slurp(dir / "f.csv"));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "time,mu_1,mu_2,sigma_1,sigma_2");
  int n = 0;
  while (std::getline(rows, line)) ++n;
  CHECK(n == 5);
  CHECK(gob_run({"forecast", "--checkpoint", dir / "m1.ckpt", "--data", dir / "test.csv",
                 "--series-id", "nope", "--out", dir / "g.csv"})
            .code == cli::kExitRuntime);

  const Outcome s = gob_run({"solvercmp", "--checkpoint", dir / "m1.ckpt", "--data",
                             dir / "test.csv", "--series-id", "0", "--out", dir / "s.csv"});
  CHECK(s.code == cli::kExitOk);
  CHECK(s.out.find("dopri") != std::string::npos);
}

TEST_CASE("gradcheck command passes on its default small model") {
  const Outcome g = gob_run({"gradcheck", "--seed", "3"});
  CHECK(g.code == cli::kExitOk);
  CHECK(g.out.find("PASS") != std::string::npos);
  const Outcome m = gob_run({"gradcheck", "--jump", "mlp", "--propagation", "discretized"});
  CHECK(m.code == cli::kExitOk);
}
