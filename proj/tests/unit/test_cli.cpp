#include "wlhn/cli.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = wlhn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_config(const std::string& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(); }

}  // namespace

TEST_CASE("gen writes identical corpora for one seed") {
  TempDir d("wlhn_cli_gen");
  const std::vector<std::string> base{"gen", "--kind", "ba", "--n", "80", "--m", "3", "--graphs", "2", "--seed", "5"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", d / "a.json"});
  b.insert(b.end(), {"--out", d / "b.json"});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(d / "a.json") == slurp(d / "b.json"));
  const auto meta = load(d / "a.meta.json");
  CHECK(meta["graphs"].size() == 2);
  CHECK(meta["graphs"][0]["num_edges"] == 3 * 77 + 3);

  CHECK(cli({"gen", "--kind", "ba", "--m", "100", "--n", "50", "--out", d / "c.json"}).code == 1);
  CHECK(cli({"gen", "--kind", "ws", "--out", d / "c.json"}).code == 1);
  CHECK(cli({"gen", "--target", "closeness", "--out", d / "c.json"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("train, embed and analyze") {
  TempDir d("wlhn_cli_train");
  const nlohmann::json cfg{
      {"task", "node-regression"},
      {"dataset", {{"kind", "generate"}, {"gen", {{"kind", "ba"}, {"n", 50}, {"m", 2}, {"graphs", 2}, {"seed", 1}}}}},
      {"model", {{"dim", 8}, {"layers", 2}, {"head", {16}}}},
      {"optim", {{"epochs", 3}, {"batch_size", 1}, {"lr", 0.01}}},
      {"output_dir", d / "run"}};
  write_config(d / "cfg.json", cfg);

  REQUIRE(cli({"train", "--config", d / "cfg.json", "--baseline", "gin"}).code == 0);
  const auto summary = load(d / "run/summary.json");
  CHECK(summary["config"]["optim"]["clip_norm"] == 5.0);  // defaults echoed
  CHECK(summary["config"]["baseline"] == "gin");
  CHECK(summary["wlhn"]["metric"] == "mse");
  CHECK(summary["gin"]["epochs_run"] == 3);
  std::istringstream lines(slurp(d / "run/metrics.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["epoch"] == ++n);
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("val_metric"));
    CHECK(j.contains("test_metric"));
  }
  CHECK(n == 3);
  const std::string first = slurp(d / "run/metrics.jsonl");
  REQUIRE(cli({"train", "--config", d / "cfg.json", "--output-dir", d / "run2"}).code == 0);
  CHECK(slurp(d / "run2/metrics.jsonl") == first);
  CHECK_FALSE(fs::exists(d / "run2/metrics_gin.jsonl"));

  // embedding from a checkpoint is reproducible
  REQUIRE(cli({"embed", "--config", d / "cfg.json", "--checkpoint", d / "run/checkpoint.json", "--out", d / "e1"}).code == 0);
  REQUIRE(cli({"embed", "--config", d / "cfg.json", "--checkpoint", d / "run/checkpoint.json", "--out", d / "e2"}).code == 0);
  CHECK(slurp(d / "e1/embeddings.csv") == slurp(d / "e2/embeddings.csv"));
  CHECK(slurp(d / "e1/embeddings.csv").rfind("node_id,graph_id,layer,x0,", 0) == 0);

  const auto r = cli({"analyze", "--embeddings", d / "e1/embeddings.csv", "--hierarchy", d / "e1/hierarchy.json",
                      "--metric", "hyperbolic", "--out", d / "a"});
  REQUIRE(r.code == 0);
  const auto report = load(d / "a/report.json");
  for (const char* key : {"metric", "correlation", "n_nodes", "n_pairs", "sampled", "scatter_csv", "matrix_csv"}) {
    CHECK(report.contains(key));
  }
  CHECK(report["metric"] == "hyperbolic");
  CHECK(fs::exists(report["matrix_csv"].get<std::string>()));

  CHECK(cli({"embed", "--config", d / "cfg.json", "--layer", "7", "--out", d / "e3"}).code == 1);
  CHECK(cli({"analyze", "--embeddings", d / "missing.csv", "--hierarchy", d / "e1/hierarchy.json", "--out", d / "a"}).code == 1);
}

TEST_CASE("embed on the cycle-with-tails graph") {
  TempDir d("wlhn_cli_embed");
  write_config(d / "cfg.json", {{"dataset", {{"kind", "builtin"}, {"name", "cycle-with-tails"}}},
                                {"model", {{"dim", 32}, {"layers", 4}, {"tau", 1.0}, {"initial_coloring", "monochromatic"}}}});
  REQUIRE(cli({"embed", "--config", d / "cfg.json", "--layer", "0", "--out", d / "l0"}).code == 0);
  std::istringstream rows(slurp(d / "l0/embeddings.csv"));
  std::string line;
  int count = 0;
  std::getline(rows, line);
  while (std::getline(rows, line)) ++count;
  CHECK(count == 1);

  REQUIRE(cli({"embed", "--config", d / "cfg.json", "--out", d / "all"}).code == 0);
  const auto h = load(d / "all/hierarchy.json");
  CHECK(h["nodes"].size() == 1 + 1 + 3 + 6 + 9 + 10);
  REQUIRE(cli({"analyze", "--embeddings", d / "all/embeddings.csv", "--hierarchy", d / "all/hierarchy.json", "--out",
               d / "an"})
              .code == 0);
  CHECK(load(d / "an/report.json")["correlation"].get<double>() >= 0.9);
}

TEST_CASE("sarkar command") {
  TempDir d("wlhn_cli_sarkar");
  std::ofstream(d / "path.txt") << "0\n0 1\n1 2\n2 3\n";
  REQUIRE(cli({"sarkar", "--tree", d / "path.txt", "--tau", "1.5", "--out", d / "s"}).code == 0);
  CHECK(load(d / "s/distortion.json")["max_distortion"].get<double>() < 1e-9);
  CHECK(slurp(d / "s/embedding.csv").rfind("node_id,x,y\n", 0) == 0);
  CHECK(cli({"sarkar", "--tree", d / "path.txt", "--tau", "0", "--out", d / "s0"}).code == 1);
  std::ofstream(d / "deep.txt") << [] {
    std::string s = "0\n";
    for (int i = 0; i < 40; ++i) s += std::to_string(i) + " " + std::to_string(i + 1) + "\n";
    return s;
  }();
  CHECK(cli({"sarkar", "--tree", d / "deep.txt", "--tau", "2", "--out", d / "s1"}).code == 2);
}

TEST_CASE("non-finite training exits with code 2") {
  TempDir d("wlhn_cli_nan");
  write_config(d / "cfg.json",
               {{"task", "node-regression"},
                {"dataset", {{"kind", "generate"}, {"gen", {{"n", 40}, {"m", 2}, {"graphs", 1}}}}},
                {"model", {{"dim", 4}, {"head", {8}}}},
                {"optim", {{"epochs", 4}, {"lr", 1e300}, {"clip_norm", 0.0}}},
                {"output_dir", d / "run"}});
  const auto r = cli({"train", "--config", d / "cfg.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("grad_norm=") != std::string::npos);
}
