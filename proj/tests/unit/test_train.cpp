#include "wlhn/errors.hpp"
#include "wlhn/train.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

using namespace wlhn;

namespace {

train::RunConfig regression_config() {
  train::RunConfig c;
  c.dataset.kind = "generate";
  c.dataset.gen.kind = "ba";
  c.dataset.gen.n = 60;
  c.dataset.gen.m = 2;
  c.dataset.gen.graphs = 2;
  c.dataset.gen.seed = 4;
  c.model.task = model::Task::kNodeRegression;
  c.model.dim = 8;
  c.model.head = {16};
  c.optim.epochs = 3;
  c.optim.batch_size = 1;
  return c;
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto c = train::run_config_from_json(nlohmann::json::parse(R"({
    "task": "node-regression",
    "dataset": {"kind": "generate", "gen": {"kind": "er", "p": 0.02, "target": "effective-size"}},
    "model": {"dim": 32, "layers": 3},
    "optim": {"lr": 0.01, "epochs": 5, "lr_schedule": "cosine"},
    "split": {"ratios": [0.5, 0.25, 0.25], "seed": 9},
    "seeds": {"init": 1, "shuffle": 2}
  })"));
  CHECK(c.model.task == model::Task::kNodeRegression);
  CHECK(c.dataset.gen.target == data::Target::kEffectiveSize);
  CHECK(c.model.dim == 32);
  CHECK(c.optim.lr_schedule == "cosine");
  CHECK(c.split.ratios[1] == 0.25);
  CHECK(c.shuffle_seed == 2);
  // every default is echoed and reparses to the same thing
  CHECK(train::to_json(train::run_config_from_json(train::to_json(c))) == train::to_json(c));

  CHECK_THROWS_AS(train::run_config_from_json(nlohmann::json{{"optimizer", {}}}), std::invalid_argument);
  CHECK_THROWS_AS(train::run_config_from_json(nlohmann::json{{"optim", {{"lr", "fast"}}}}), std::invalid_argument);
  auto bad = c;
  bad.optim.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.dataset.kind = "tud";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("WLHN_SEED replaces every seed") {
  auto c = regression_config();
  setenv("WLHN_SEED", "77", 1);
  train::apply_seed_override(c);
  CHECK(c.split.seed == 77);
  CHECK(c.init_seed == 77);
  CHECK(c.shuffle_seed == 77);
  setenv("WLHN_SEED", "x1", 1);
  CHECK_THROWS_AS(train::apply_seed_override(c), std::invalid_argument);
  unsetenv("WLHN_SEED");
}

TEST_CASE("zero epochs evaluates the untrained model only") {
  auto c = regression_config();
  c.optim.epochs = 0;
  const auto corpus = train::load_dataset(c.dataset);
  train::Trainer t(c, corpus);
  const auto r = t.run();
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
  CHECK(r.metric == "mse");
  CHECK(r.test_at_best == r.untrained_test);
  CHECK(std::isfinite(r.untrained_val));
}

TEST_CASE("node splits are per graph and disjoint") {
  const auto c = regression_config();
  const auto corpus = train::load_dataset(c.dataset);
  train::Trainer t(c, corpus);
  const auto& s = t.split();
  CHECK(t.node_unit());
  CHECK(s.train.size() + s.val.size() + s.test.size() == 120);
  std::vector<int> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  const auto [val, test] = t.evaluate_val_test();
  CHECK(val == doctest::Approx(t.evaluate(s.val)).epsilon(1e-12));
  CHECK(test == doctest::Approx(t.evaluate(s.test)).epsilon(1e-12));
}

TEST_CASE("training is deterministic and reduces the loss") {
  auto c = regression_config();
  c.optim.epochs = 15;
  c.optim.lr = 1e-2;
  const auto corpus = train::load_dataset(c.dataset);
  auto run = [&] {
    train::Trainer t(c, corpus);
    return t.run();
  };
  const auto a = run(), b = run();
  REQUIRE(a.history.size() == 15);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_metric == b.history[i].val_metric);
  }
  CHECK(a.history.back().train_loss < a.history.front().train_loss);
  CHECK(a.best_val <= a.untrained_val);
}

TEST_CASE("graph classification on TU files") {
  train::RunConfig c;
  c.dataset = {"tud", WLHN_TEST_DATA_DIR "/TINY", "TINY"};
  c.model.dim = 4;
  c.model.head = {8};
  c.optim.epochs = 2;
  c.split.ratios = {0.5, 0.5, 0.0};
  const auto corpus = train::load_dataset(c.dataset);
  train::Trainer t(c, corpus);
  CHECK(t.model().config().input_dim == 3);
  CHECK(t.model().config().num_outputs == 2);
  const auto r = t.run();
  CHECK(r.metric == "accuracy");
  CHECK(r.history.size() == 2);
  CHECK((r.best_val == 0.0 || r.best_val == 1.0));
}

TEST_CASE("non-finite losses abort with diagnostics") {
  auto c = regression_config();
  c.optim.lr = 1e300;
  c.optim.clip_norm = 0.0;
  c.optim.epochs = 5;
  const auto corpus = train::load_dataset(c.dataset);
  train::Trainer t(c, corpus);
  try {
    t.run();
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("boundary_clamps=") != std::string::npos);
  }
}
