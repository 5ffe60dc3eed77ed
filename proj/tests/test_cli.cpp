#include "ewe/data.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <doctest/doctest.h>
#include <nlohmann/json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ewe_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      std::string(EWE_BIN) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  out << body;
  return path.string();
}

std::vector<json> parse_lines(const std::string& text) {
  std::vector<json> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) records.push_back(json::parse(line));
  return records;
}

std::string figure_corpus() {
  return R"({"id": "d1", "claims": ["business method"], "codes": ["G06Q", "G06Q", "A01B"]})"
         "\n"
         R"({"id": "d2", "claims": ["soil working"], "codes": ["A01B", "G06Q", "A01B"]})"
         "\n"
         R"({"id": "d3", "claims": ["mixed"], "codes": ["G06Q", "A01B"]})"
         "\n";
}

}  // namespace

TEST_CASE("cli relabels a corpus") {
  fs::path dir = scratch_dir("relabel");
  std::string corpus = write_file(dir / "in.jsonl", figure_corpus());
  std::string cfg = write_file(dir / "r.conf", "corpus=" + corpus + "\n");
  RunResult r = run_cli(dir, "relabel --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 3);
  CHECK(records[0]["codes"] == json({"First-G06Q", "Later-G06Q", "Later-A01B"}));
  CHECK(records[1]["codes"] == json({"First-A01B", "Later-G06Q", "Later-A01B"}));
  CHECK(records[2]["codes"] == json({"First-G06Q", "Later-A01B"}));
  CHECK(records[0]["claims"] == json({"business method"}));
}

TEST_CASE("cli writes to output= instead of stdout when asked") {
  fs::path dir = scratch_dir("outfile");
  std::string corpus = write_file(dir / "in.jsonl", figure_corpus());
  fs::path outfile = dir / "result.jsonl";
  std::string cfg = write_file(dir / "r.conf",
                               "corpus=" + corpus + "\noutput=" + outfile.string() + "\n");
  RunResult r = run_cli(dir, "relabel --config " + cfg);
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(parse_lines(slurp(outfile)).size() == 3);
}

TEST_CASE("cli encodes inline text") {
  fs::path dir = scratch_dir("encode");
  std::string cfg = write_file(dir / "e.conf", "u=4\nv=2\ntext=hi yo\n");
  RunResult r = run_cli(dir, "encode --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 1);
  CHECK(records[0]["id"] == "text");
  CHECK(records[0]["u"] == 4);
  CHECK(records[0]["v"] == 2);
  CHECK(records[0]["ids"] == json({{1, 0}, {108, 109}, {125, 115}, {0, 0}}));
  CHECK(records[0]["mask"] == json({1, 1, 1, 0}));
}

TEST_CASE("cli flag overrides reshape the encoding") {
  fs::path dir = scratch_dir("encode_override");
  std::string cfg = write_file(dir / "e.conf", "u=4\nv=2\ntext=hi yo\n");
  RunResult r = run_cli(dir, "encode --config " + cfg + " --v 3");
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 1);
  CHECK(records[0]["v"] == 3);
  CHECK(records[0]["ids"][1] == json({108, 109, 0}));
}

TEST_CASE("cli encodes a corpus document per line") {
  fs::path dir = scratch_dir("encode_corpus");
  std::string corpus = write_file(dir / "in.jsonl", figure_corpus());
  std::string cfg = write_file(dir / "e.conf", "u=8\nv=4\ncorpus=" + corpus + "\n");
  RunResult r = run_cli(dir, "encode --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 3);
  CHECK(records[0]["id"] == "d1");
  CHECK(records[2]["id"] == "d3");
  CHECK(r.err.find("encoded 3 documents") != std::string::npos);
}

TEST_CASE("cli eval scores aligned bit streams") {
  fs::path dir = scratch_dir("eval_streams");
  std::string pred = write_file(dir / "pred.jsonl",
                                R"({"id": "a", "bits": [1, 0, 1]})"
                                "\n"
                                R"({"id": "b", "bits": [0, 1, 0]})"
                                "\n");
  std::string cfg = write_file(dir / "v.conf", "pred=" + pred + "\ngold=" + pred + "\n");
  RunResult r = run_cli(dir, "eval --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 1);
  CHECK(records[0]["f1"] == 1.0);
  CHECK(records[0]["precision"] == 1.0);
  CHECK(records[0]["recall"] == 1.0);
  CHECK(records[0]["docs"] == 2);
  CHECK(records[0]["tp"] == 3);

  std::string gold = write_file(dir / "gold.jsonl",
                                R"({"id": "b", "bits": [1, 0, 1]})"
                                "\n"
                                R"({"id": "a", "bits": [0, 1, 0]})"
                                "\n");
  std::string cfg2 = write_file(dir / "v2.conf", "pred=" + pred + "\ngold=" + gold + "\n");
  RunResult bad = run_cli(dir, "eval --config " + cfg2);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("order mismatch") != std::string::npos);
}

TEST_CASE("cli stats summarizes raw and relabeled codes") {
  fs::path dir = scratch_dir("stats");
  std::string corpus = write_file(dir / "in.jsonl", figure_corpus());
  std::string cfg = write_file(dir / "s.conf", "corpus=" + corpus + "\n");
  RunResult r = run_cli(dir, "stats --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 2);
  CHECK(records[0]["scope"] == "codes");
  CHECK(records[0]["n_labels"] == 2);
  CHECK(records[0]["total_mentions"] == 8);
  CHECK(records[1]["scope"] == "relabeled");
  CHECK(records[1]["n_labels"] == 4);
  CHECK(records[1]["docs"] == 3);
  CHECK(records[1].contains("std"));
  CHECK(records[1].contains("std_majors"));
  CHECK(records[1]["majors"].is_array());
}

TEST_CASE("cli error contract") {
  fs::path dir = scratch_dir("errors");
  std::string corpus = write_file(dir / "in.jsonl", figure_corpus());
  std::string cfg = write_file(dir / "ok.conf", "corpus=" + corpus + "\n");

  // no subcommand / missing --config: usage error, nonzero exit, JSON error record
  RunResult none = run_cli(dir, "");
  CHECK(none.code != 0);
  CHECK(json::parse(none.err).contains("error"));
  RunResult noconf = run_cli(dir, "relabel");
  CHECK(noconf.code != 0);
  CHECK(json::parse(noconf.err)["error"].get<std::string>().find("--config") !=
        std::string::npos);

  // config file must exist
  RunResult missing = run_cli(dir, "relabel --config " + (dir / "nope.conf").string());
  CHECK(missing.code != 0);
  CHECK(json::parse(missing.err).contains("error"));

  // runtime errors: exit 1 with a single-line JSON record naming the problem
  std::string bad = write_file(dir / "bad.conf", "banana=1\n");
  RunResult unknown = run_cli(dir, "relabel --config " + bad);
  CHECK(unknown.code == 1);
  CHECK(json::parse(unknown.err)["error"].get<std::string>().find("banana") !=
        std::string::npos);

  // dangling flag value
  RunResult dangling = run_cli(dir, "relabel --config " + cfg + " --u");
  CHECK(dangling.code == 1);
  CHECK(json::parse(dangling.err).contains("error"));

  // eval needs both streams
  std::string half = write_file(dir / "half.conf", "pred=" + corpus + "\n");
  RunResult lonely = run_cli(dir, "eval --config " + half);
  CHECK(lonely.code == 1);
  CHECK(json::parse(lonely.err)["error"].get<std::string>().find("together") !=
        std::string::npos);
}

TEST_CASE("cli bench emits one json row per v") {
  fs::path dir = scratch_dir("bench");
  std::string cfg = write_file(dir / "b.conf",
                               "u=8\nv=2\nc=4\nlayers=1\nbench_reps=5\nbench_warmup=1\n"
                               "bench_v=2,1\n");
  RunResult r = run_cli(dir, "bench --config " + cfg);
  REQUIRE(r.code == 0);
  auto records = parse_lines(r.out);
  REQUIRE(records.size() == 2);
  CHECK(records[0]["v"] == 2);
  CHECK(records[1]["v"] == 1);
  CHECK(records[0]["w"] == 8);
  CHECK(records[1]["w"] == 8);
  CHECK(records[0]["chars"] == 16);
  CHECK(records[1]["chars"] == 8);
  CHECK(records[0]["flops"] == records[1]["flops"]);
  CHECK(records[0]["mean_s"].get<double>() > 0.0);
}

TEST_CASE("cli trains, checkpoints, and evaluates") {
  fs::path dir = scratch_dir("train_eval");

  ewe::data::SyntheticSpec spec;
  spec.n_classes = 2;
  spec.n_docs = 40;
  spec.vocab_size = 12;
  spec.tokens_per_doc = 8;
  spec.max_labels = 1;
  spec.keyword_strength = 1.0;
  spec.seed = 21;
  ewe::data::save_corpus((dir / "train.jsonl").string(), ewe::data::gen_synthetic(spec));

  fs::path ckpt = dir / "model.bin";
  std::string cfg = write_file(dir / "t.conf",
                               "u=16\nv=4\nc=8\nlayers=1\n"
                               "epochs=2\nbatch_size=8\nlr0=0.001\nseed=3\n"
                               "corpus=" + (dir / "train.jsonl").string() +
                                   "\n"
                                   "val_corpus=" + (dir / "train.jsonl").string() +
                                   "\n"
                                   "checkpoint=" + ckpt.string() + "\n");
  RunResult train = run_cli(dir, "train --config " + cfg);
  REQUIRE(train.code == 0);
  auto train_records = parse_lines(train.out);
  REQUIRE(train_records.size() == 1);
  CHECK(train_records[0]["epochs"] == 2);
  CHECK(train_records[0]["final_loss"].is_number());
  CHECK(train_records[0].contains("val_f1"));
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(dir / "model.bin.vocab"));
  CHECK(fs::exists(dir / "model.bin.config"));
  CHECK(train.err.find("training on 40 documents") != std::string::npos);
  CHECK(train.err.find("epoch 2/2") != std::string::npos);

  RunResult eval = run_cli(dir, "eval --config " + cfg);
  REQUIRE(eval.code == 0);
  auto eval_records = parse_lines(eval.out);
  REQUIRE(eval_records.size() == 1);
  CHECK(eval_records[0]["docs"] == 40);
  CHECK(eval_records[0]["threshold"] == 0.3);
  CHECK(eval_records[0]["f1"].is_number());

  // a second train run with the same seed reproduces the loss exactly
  RunResult again = run_cli(dir, "train --config " + cfg);
  REQUIRE(again.code == 0);
  CHECK(parse_lines(again.out)[0]["final_loss"] == train_records[0]["final_loss"]);
}
