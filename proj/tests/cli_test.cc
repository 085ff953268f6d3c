// Copyright 2026 The embinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end runs of the command-line tool.

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "embinv/harness.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace embinv {
namespace {

using ::testing::HasSubstr;

struct Run {
  int exit_code;
  std::string out;
};

Run Cli(const std::string& args) {
  const std::string command = std::string(EMBINV_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) return {-1, ""};
  std::string out;
  char buf[4096];
  while (const std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<nlohmann::json> JsonLines(const std::string& text) {
  std::vector<nlohmann::json> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::TempPath("cli_" + std::string(
        ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  void MakeData() {
    ASSERT_EQ(Cli("gen-table --vocab 80 --dim 16 --seed 3 --out " + P("t.embt")).exit_code, 0);
    ASSERT_EQ(Cli("gen-corpus --vocab 80 --count 5 --length 12 --branching 3 --pii-span 2 "
                  "--out " + P("c.jsonl")).exit_code, 0);
    ASSERT_EQ(Cli("gen-corpus --vocab 80 --count 200 --length 20 --branching 3 --seed 9 "
                  "--out " + P("train.jsonl")).exit_code, 0);
    ASSERT_EQ(Cli("train-prior --corpus " + P("train.jsonl") + " --table " + P("t.embt") +
                  " --order 2 --out " + P("prior.json")).exit_code, 0);
  }

  std::filesystem::path dir_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Cli("").exit_code, 1);
  EXPECT_EQ(Cli("frobnicate").exit_code, 1);
  EXPECT_EQ(Cli("gen-table").exit_code, 1);
  EXPECT_EQ(Cli("calibrate --family cauchy --sensitivity 1 --epsilon 1").exit_code, 1);
  EXPECT_EQ(Cli("calibrate --sensitivity 1 --epsilon 1 --scale 2").exit_code, 1);
  EXPECT_EQ(Cli("--help").exit_code, 0);
}

TEST_F(CliTest, DataErrors) {
  EXPECT_EQ(Cli("attack --table " + P("missing.embt") + " --obf " + P("x.obf")).exit_code, 2);
  std::ofstream(P("junk.embt")) << "not a table";
  EXPECT_EQ(Cli("calibrate --table " + P("junk.embt") + " --epsilon 1").exit_code, 2);
}

TEST_F(CliTest, Calibrate) {
  const auto run = Cli("calibrate --family laplace --sensitivity 2 --epsilon 4");
  ASSERT_EQ(run.exit_code, 0);
  const auto j = nlohmann::json::parse(run.out);
  EXPECT_DOUBLE_EQ(j["scale"].get<double>(), 0.5);
  const auto back = nlohmann::json::parse(
      Cli("calibrate --family gaussian --sensitivity 1 --scale 10").out);
  EXPECT_DOUBLE_EQ(back["delta"].get<double>(), 1e-5);
  EXPECT_GT(back["epsilon"].get<double>(), 0.0);
}

TEST_F(CliTest, ObfuscateAttackEvaluatePipeline) {
  MakeData();
  ASSERT_EQ(Cli("obfuscate --table " + P("t.embt") + " --corpus " + P("c.jsonl") +
                " --scale 1e-9 --seed 4 --out " + P("c.obf")).exit_code, 0);
  for (const std::string method : {"nn", "beamclean"}) {
    SCOPED_TRACE(method);
    const std::string decoded = P("decoded_" + method + ".jsonl");
    ASSERT_EQ(Cli("attack --table " + P("t.embt") + " --obf " + P("c.obf") + " --method " +
                  method + " --prior ngram:" + P("prior.json") +
                  " --beam 4 --pool 10 --out " + decoded).exit_code, 0);
    const auto eval = Cli("evaluate --corpus " + P("c.jsonl") + " --decoded " + decoded);
    ASSERT_EQ(eval.exit_code, 0);
    const auto rows = JsonLines(eval.out);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows.back()["id"], "__mean__");
    EXPECT_EQ(rows.back()["asr_percent"], 100.0);
    EXPECT_EQ(rows.back()["pii_recovery_percent"], 100.0);
  }
  const auto beam = JsonLines(Cli("attack --table " + P("t.embt") + " --obf " + P("c.obf") +
                                  " --estimation gradient --family laplace").out);
  ASSERT_EQ(beam.size(), 5u);
  EXPECT_TRUE(beam[0].contains("theta_trajectory"));
  EXPECT_EQ(beam[0]["method"], "beamclean");
}

TEST_F(CliTest, CrossVocabularyAttack) {
  MakeData();
  ASSERT_EQ(Cli("gen-table --vocab 80 --dim 16 --seed 5 --out " + P("prior_t.embt")).exit_code,
            0);
  ASSERT_EQ(Cli("obfuscate --table " + P("t.embt") + " --corpus " + P("c.jsonl") +
                " --family laplace --epsilon 1000 --out " + P("c.obf")).exit_code, 0);
  const auto run = Cli("attack --table " + P("t.embt") + " --obf " + P("c.obf") +
                       " --prior ngram:" + P("prior.json") + " --token-map " +
                       P("prior_t.embt") + " --pool 5");
  ASSERT_EQ(run.exit_code, 0);
  const auto rows = JsonLines(run.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0]["token_map"]["mapped"], 80);
}

TEST_F(CliTest, SweepWritesCsvAndSignalsPartialFailure) {
  MakeData();
  std::ofstream(P("sweep.json")) << nlohmann::json{
      {"table", "t.embt"}, {"corpus", "c.jsonl"}, {"scales", {1e-12, 2.0}},
      {"prior", "ngram:prior.json"}, {"candidate_pool", 10}, {"output", "out.csv"}}.dump();
  ASSERT_EQ(Cli("sweep --config " + P("sweep.json")).exit_code, 0);
  std::ifstream csv(P("out.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, kSweepCsvHeader);

  std::ofstream(P("bad.jsonl")) << R"({"id":"ok","tokens":[1,2,3]})" << "\n"
                                << R"({"id":"bad","tokens":[1,999]})" << "\n";
  std::ofstream(P("sweep_bad.json")) << nlohmann::json{
      {"table", "t.embt"}, {"corpus", "bad.jsonl"}, {"scales", {0.1}},
      {"methods", {"nn"}}}.dump();
  const auto partial = Cli("sweep --config " + P("sweep_bad.json"));
  EXPECT_EQ(partial.exit_code, 3);
  EXPECT_THAT(partial.out, HasSubstr(",bad,nan,nan,0,1"));
}

}  // namespace
}  // namespace embinv
