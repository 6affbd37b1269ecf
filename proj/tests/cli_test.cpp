#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>

#include "json.hpp"
#include "regemb/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, bool merge_stderr = false) {
  const std::string cmd = std::string(REGEMB_CLI_PATH) + " " + args +
                          (merge_stderr ? " 2>&1" : " 2>/dev/null");
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> buffer;
  while (std::size_t n = std::fread(buffer.data(), 1, buffer.size(), pipe)) {
    result.output.append(buffer.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// two-class keyword CSV, and a balanced four-class variant
void write_keyword_csv(const fs::path& path, int docs_per_class, int classes,
                       std::uint64_t seed) {
  static const std::vector<std::vector<std::string>> words = {
      {"alpha", "bravo", "charlie"},
      {"delta", "echo", "foxtrot"},
      {"golf", "hotel", "india"},
      {"juliet", "kilo", "lima"},
  };
  regemb::Rng rng(seed);
  std::ofstream out(path);
  for (int cls = 0; cls < classes; ++cls) {
    for (int d = 0; d < docs_per_class; ++d) {
      std::ostringstream text;
      const std::size_t len = 6 + rng.next_below(5);
      for (std::size_t i = 0; i < len; ++i) {
        if (i) text << ' ';
        text << words[cls][rng.next_below(3)];
      }
      out << '"' << (cls + 1) << "\",\"" << text.str() << "\"\n";
    }
  }
}

std::string strip_wall_ms(const std::string& ndjson) {
  std::istringstream in(ndjson);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    j.erase("wall_ms");
    out << j.dump() << "\n";
  }
  return out.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST(CliCountParams, KnownDatasetsMatchAndOutputIsDeterministic) {
  CliResult a = run_cli("count-params --dataset ag --method are");
  CliResult b = run_cli("count-params --dataset ag --method are");
  ASSERT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.output, b.output);
  json j = json::parse(a.output);
  EXPECT_EQ(j["total"].get<long long>(), 16268804);
  EXPECT_EQ(j["reference_match"], "MATCH");

  json yahoo = json::parse(run_cli("count-params --dataset yahoo --method are").output);
  EXPECT_EQ(yahoo["total"].get<long long>(), 97970954);
  EXPECT_EQ(yahoo["reference_match"], "MATCH");
}

TEST(CliCountParams, ExplicitShapeEvaluatesClosedForm) {
  CliResult r = run_cli("count-params --v 1000 --h 4 --region 3 --n 2 --method lre");
  ASSERT_EQ(r.exit_code, 0);
  json j = json::parse(r.output);
  EXPECT_EQ(j["total"].get<long long>(), 16010);
}

TEST(CliTrain, MissingDataFileExitsTwoAndNamesPath) {
  CliResult r = run_cli("train --train /nonexistent/corpus.csv --out /tmp/regemb_cli_x",
                        /*merge_stderr=*/true);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("/nonexistent/corpus.csv"), std::string::npos);
}

TEST(CliTrain, OverfitsTinyCorpusAndEvalReportsPerfectAccuracy) {
  const fs::path dir = temp_dir("regemb_cli_overfit");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 8, 2, 11);

  CliResult train = run_cli(
      "train --train " + csv.string() + " --out " + (dir / "run").string() +
      " --h 8 --region 3 --batch 4 --lr 1e-2 --epochs 40 --seed 5"
      " --val-fraction 0 --min-count 1");
  ASSERT_EQ(train.exit_code, 0) << train.output;
  json summary = json::parse(train.output);
  EXPECT_EQ(summary["documents"].get<int>(), 16);

  CliResult eval = run_cli("eval --checkpoint " + (dir / "run/model.ckpt").string() +
                           " --test " + csv.string());
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  json report = json::parse(eval.output);
  EXPECT_DOUBLE_EQ(report["accuracy"].get<double>(), 1.0);

  // confusion rows sum to the per-class document counts
  const auto confusion = report["confusion"];
  for (std::size_t row = 0; row < confusion.size(); ++row) {
    long long sum = 0;
    for (const auto& cell : confusion[row]) sum += cell.get<long long>();
    EXPECT_EQ(sum, 8);
  }
  fs::remove_all(dir);
}

TEST(CliTrain, FreshInitOnBalancedFourClassDataIsNearChance) {
  const fs::path dir = temp_dir("regemb_cli_chance");
  const fs::path csv = dir / "four.csv";
  write_keyword_csv(csv, 10, 4, 21);

  CliResult train = run_cli(
      "train --train " + csv.string() + " --out " + (dir / "run").string() +
      " --h 8 --region 3 --epochs 0 --seed 3 --val-fraction 0 --min-count 1");
  ASSERT_EQ(train.exit_code, 0) << train.output;

  CliResult eval = run_cli("eval --checkpoint " + (dir / "run/model.ckpt").string() +
                           " --test " + csv.string());
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  json report = json::parse(eval.output);
  EXPECT_NEAR(report["accuracy"].get<double>(), 0.25, 0.1);
  fs::remove_all(dir);
}

TEST(CliTrain, IdenticalConfigAndSeedReproduceMetricsExactly) {
  const fs::path dir = temp_dir("regemb_cli_repro");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 8, 2, 31);

  const std::string common =
      "train --train " + csv.string() +
      " --h 6 --region 3 --batch 4 --lr 1e-3 --epochs 6 --seed 9 --min-count 1"
      " --eval-every 3 --val-fraction 0.2";
  CliResult a = run_cli(common + " --out " + (dir / "a").string());
  CliResult b = run_cli(common + " --out " + (dir / "b").string());
  ASSERT_EQ(a.exit_code, 0);
  ASSERT_EQ(b.exit_code, 0);
  EXPECT_EQ(strip_wall_ms(read_file(dir / "a/metrics.ndjson")),
            strip_wall_ms(read_file(dir / "b/metrics.ndjson")));
  EXPECT_EQ(read_file(dir / "a/model.ckpt"), read_file(dir / "b/model.ckpt"));
  fs::remove_all(dir);
}

TEST(CliTrain, ResolvedConfigSnapshotReplaysTheRun) {
  const fs::path dir = temp_dir("regemb_cli_replay");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 6, 2, 41);

  CliResult first = run_cli(
      "train --train " + csv.string() + " --out " + (dir / "a").string() +
      " --h 6 --region 3 --batch 4 --lr 5e-3 --epochs 4 --seed 13 --min-count 1"
      " --val-fraction 0.2 --eval-every 2");
  ASSERT_EQ(first.exit_code, 0) << first.output;
  ASSERT_TRUE(fs::exists(dir / "a/resolved.cfg"));

  CliResult replay = run_cli("train --config " + (dir / "a/resolved.cfg").string() +
                             " --out " + (dir / "b").string());
  ASSERT_EQ(replay.exit_code, 0) << replay.output;
  EXPECT_EQ(strip_wall_ms(read_file(dir / "a/metrics.ndjson")),
            strip_wall_ms(read_file(dir / "b/metrics.ndjson")));
  fs::remove_all(dir);
}

TEST(CliTrain, MultiRunAveragesAcrossSeeds) {
  const fs::path dir = temp_dir("regemb_cli_runs");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 10, 2, 71);

  CliResult r = run_cli("train --train " + csv.string() + " --out " +
                        (dir / "out").string() +
                        " --h 6 --region 3 --epochs 3 --seed 7 --min-count 1"
                        " --runs 3 --val-fraction 0.2 --eval-every 2");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  json summary = json::parse(r.output);
  EXPECT_EQ(summary["runs"].get<int>(), 3);
  ASSERT_EQ(summary["run_results"].size(), 3u);
  EXPECT_EQ(summary["run_results"][2]["seed"].get<int>(), 9);
  EXPECT_TRUE(summary.contains("mean_best_val_acc"));
  for (int run = 0; run < 3; ++run) {
    EXPECT_TRUE(fs::exists(dir / ("out/run" + std::to_string(run)) / "model.ckpt"));
  }
  fs::remove_all(dir);
}

TEST(CliEval, ExplicitSpecContradictionExitsThree) {
  const fs::path dir = temp_dir("regemb_cli_mismatch");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 6, 2, 51);
  CliResult train = run_cli(
      "train --train " + csv.string() + " --out " + (dir / "run").string() +
      " --h 6 --region 3 --epochs 1 --seed 1 --val-fraction 0 --min-count 1");
  ASSERT_EQ(train.exit_code, 0);

  CliResult eval = run_cli("eval --checkpoint " + (dir / "run/model.ckpt").string() +
                               " --test " + csv.string() + " --method lre",
                           /*merge_stderr=*/true);
  EXPECT_EQ(eval.exit_code, 3);
  EXPECT_NE(eval.output.find("compatibility"), std::string::npos);
  fs::remove_all(dir);
}

TEST(CliSaliency, EmptyInputExitsTwoAndTokenCountMatchesTokenizer) {
  const fs::path dir = temp_dir("regemb_cli_saliency");
  const fs::path csv = dir / "train.csv";
  write_keyword_csv(csv, 6, 2, 61);
  CliResult train = run_cli(
      "train --train " + csv.string() + " --out " + (dir / "run").string() +
      " --h 6 --region 3 --epochs 2 --seed 2 --val-fraction 0 --min-count 1");
  ASSERT_EQ(train.exit_code, 0);
  const std::string ckpt = (dir / "run/model.ckpt").string();

  CliResult empty = run_cli("saliency --checkpoint " + ckpt + " --text \"\"",
                            /*merge_stderr=*/true);
  EXPECT_EQ(empty.exit_code, 2);
  EXPECT_NE(empty.output.find("empty document"), std::string::npos);

  CliResult ok = run_cli("saliency --checkpoint " + ckpt +
                         " --text \"alpha bravo, charlie!\" --format json");
  ASSERT_EQ(ok.exit_code, 0) << ok.output;
  json report = json::parse(ok.output);
  // tokenizer yields: alpha bravo , charlie !
  EXPECT_EQ(report["tokens"].size(), 5u);
  EXPECT_EQ(report["scores"].size(), 5u);

  CliResult html = run_cli("saliency --checkpoint " + ckpt +
                           " --text \"alpha bravo\" --format html");
  ASSERT_EQ(html.exit_code, 0);
  EXPECT_NE(html.output.find("<span"), std::string::npos);
  fs::remove_all(dir);
}
