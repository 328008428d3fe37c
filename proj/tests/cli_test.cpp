#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"

#ifndef STYLESHIFT_CLI_PATH
#error "STYLESHIFT_CLI_PATH must be defined"
#endif

namespace styleshift {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

const fs::path kFixture = fs::path(STYLESHIFT_TEST_DATA_DIR) / "cli_fixture";

struct Result {
  int status = -1;
  std::string out;  // stdout and stderr interleaved
};

Result run(const std::string& args) {
  const std::string command = std::string(STYLESHIFT_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return r;
  char buffer[4096];
  std::size_t n;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) r.out.append(buffer, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, HelpForEverySubcommand) {
  EXPECT_EQ(run("--help").status, 0);
  EXPECT_EQ(run("--version").out, "0.3.0\n");
  for (const char* sub : {"prepare-data", "corrupt", "stylize", "lowpass", "train", "evaluate",
                          "analyze-spectrum", "analyze-gram", "report", "sweep"}) {
    const Result r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  Result r = run("evaluate --model m.json --clean c.tsv --corrupted d --out o.json --bogus");
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error: usage:", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("Usage:"), std::string::npos);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("lowpass --manifest x.tsv").status, 2);
  EXPECT_EQ(run("stylize --content a --out b --strength 2").status, 2);
}

TEST(Cli, RuntimeErrorsExitOneWithCode) {
  TempDir dir("cli_err");
  const Result r = run("evaluate --model " + quoted(dir.path() / "missing.json") + " --clean " +
                       quoted(kFixture / "clean.tsv") + " --corrupted " +
                       quoted(kFixture / "corrupted") + " --out " + quoted(dir.path() / "r.json"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("error: io.read:"), std::string::npos) << r.out;
}

TEST(Cli, EvaluateStubMatchesGoldenReport) {
  TempDir dir("cli_eval");
  const fs::path out = dir.path() / "report.json";
  const Result r = run("evaluate --model " + quoted(kFixture / "stub.json") + " --clean " +
                       quoted(kFixture / "clean.tsv") + " --corrupted " +
                       quoted(kFixture / "corrupted") + " --ood " + quoted(kFixture / "ood.tsv") +
                       " --seed 3 --out " + quoted(out));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(slurp(out), slurp(kFixture / "report.json"));

  const json report = json::parse(slurp(out));
  EXPECT_NEAR(report.at("per_category").at("noise").get<double>(), 100 * 8.6 / 15, 1e-9);
  EXPECT_NEAR(report.at("combined_mean").get<double>(), 50 * ((8.6 / 15 + 1.8) / 4 + 0.5), 1e-9);

  const json descriptor = json::parse(slurp(out.string() + ".run.json"));
  EXPECT_EQ(descriptor.at("command"), "evaluate");
  EXPECT_EQ(descriptor.at("config").at("seed"), 3);
  EXPECT_EQ(descriptor.at("datasets"), report.at("metadata").at("dataset_hashes"));

  // Identical runs aggregate to zero spread.
  const fs::path csv = dir.path() / "table.csv";
  const Result agg = run("report --runs " + quoted(out) + " " + quoted(kFixture / "report.json") +
                         " --label stub --out " + quoted(csv));
  ASSERT_EQ(agg.status, 0) << agg.out;
  std::istringstream lines(slurp(csv));
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header.rfind("label,runs,clean_mean,clean_std,", 0), 0u) << header;
  EXPECT_EQ(row.rfind("stub,2,100.00,0.00,57.33,0.00,", 0), 0u) << row;
}

TEST(Cli, SmallPipelineEndToEnd) {
  TempDir dir("cli_pipe");
  const fs::path data = dir.path() / "data";
  Result r = run("prepare-data --out " + quoted(data) +
                 " --resolution 8 --photos 30 --paintings 10 --test 10 --ood 10 --seed 5");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"photos.tsv", "paintings.tsv", "test.tsv", "ood.tsv", "run.json"}) {
    EXPECT_TRUE(fs::exists(data / f)) << f;
  }

  const fs::path corrupted = dir.path() / "corrupted";
  r = run("corrupt --manifest " + quoted(data / "test.tsv") + " --out " + quoted(corrupted) +
          " --spec fog:3 --spec gaussian_noise:1 --seed 2");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(corrupted / "fog" / "3" / "manifest.tsv"));

  const fs::path stylized = dir.path() / "stylized";
  r = run("stylize --content " + quoted(data / "photos.tsv") +
          " --policy intraclass --seed 1 --out " + quoted(stylized));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(stylized / "pairing.tsv"));

  const fs::path filtered = dir.path() / "filtered";
  r = run("lowpass --manifest " + quoted(data / "photos.tsv") + " --out " + quoted(filtered));
  ASSERT_EQ(r.status, 0) << r.out;

  const fs::path spectrum = dir.path() / "spectrum.csv";
  r = run("analyze-spectrum --manifest " + quoted(data / "photos.tsv") + " --manifest " +
          quoted(filtered / "filtered.tsv") + " --out " + quoted(spectrum));
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(spectrum);
  EXPECT_EQ(csv.rfind("dataset,r,mean_power\nphotos,0,", 0), 0u);
  EXPECT_NE(csv.find("\nfiltered,5,"), std::string::npos);

  const fs::path gram = dir.path() / "gram.json";
  r = run("analyze-gram --content " + quoted(data / "photos.tsv") +
          " --policy intraclass --count 20 --out " + quoted(gram));
  ASSERT_EQ(r.status, 0) << r.out;

  std::ofstream(dir.path() / "train.json") << json{{"epochs", 1},
                                                   {"lr_drop_epoch", 2},
                                                   {"batch_size", 8},
                                                   {"backbone", {{"architecture", "resnet_micro"}}}}
                                                  .dump();
  const fs::path model = dir.path() / "model";
  r = run("train --scheme stylized --photos " + quoted(data / "photos.tsv") + " --stylized " +
          quoted(stylized / "stylized.tsv") + " --config " + quoted(dir.path() / "train.json") +
          " --seed 4 --out " + quoted(model));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(model / "model.ckpt"));
  EXPECT_TRUE(fs::exists(model / "train_log.jsonl"));

  const fs::path report = dir.path() / "report.json";
  r = run("evaluate --model " + quoted(model / "model.ckpt") + " --clean " +
          quoted(data / "test.tsv") + " --corrupted " + quoted(corrupted) + " --out " +
          quoted(report));
  // Only two corrupted sets exist, so the category means cannot be formed.
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("evaluation.missing_set"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace styleshift
