// Copyright 2026 The gradquant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================


#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with `args`; stderr is folded into the output when asked.
Run cli(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string(GQ_CLI_PATH) + " " + args +
                    (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("gradquant_cli_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::vector<double> loss_column(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

const char* kTrain =
    "train --problem quadratic --quantizer dqsg --delta 0.5 --workers 4 "
    "--rounds 60 --lr 0.1";

TEST(Cli, TrainWritesDecreasingLossCsv) {
  auto r = cli(kTrain);
  ASSERT_EQ(r.exit_code, 0);
  auto loss = loss_column(r.out);
  ASSERT_EQ(loss.size(), 60u);
  EXPECT_LT(loss.back(), 0.5 * loss.front());
}

TEST(Cli, TrainIsDeterministic) {
  auto a = cli(kTrain), b = cli(kTrain);
  EXPECT_EQ(a.out, b.out);
  auto c = cli(std::string(kTrain) + " --seed 9");
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, TrainOutputDirectory) {
  auto dir = temp_dir("train");
  auto r = cli(std::string(kTrain) + " --out " + dir.string() +
               " quantizer=ndqsg groups=2:2");
  ASSERT_EQ(r.exit_code, 0);
  std::ifstream js(dir / "summary.json");
  auto summary = nlohmann::json::parse(js);
  EXPECT_EQ(summary["config"]["quantizer"], "ndqsg");
  EXPECT_EQ(summary["rounds"], 60);
  EXPECT_TRUE(summary.contains("decode_failures_total"));
  EXPECT_TRUE(std::filesystem::exists(dir / "rounds.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Cli, ConfigFileAndOverrides) {
  auto dir = temp_dir("cfg");
  std::ofstream(dir / "exp.cfg") << "problem = least_squares\nworkers = 2\n"
                                    "rounds = 5\nlr = 0.01\n";
  auto r = cli("train --config " + (dir / "exp.cfg").string() + " rounds=3");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(loss_column(r.out).size(), 3u);
  EXPECT_NE(r.out.find("# problem=least_squares"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("train --workers 0").exit_code, 2);
  EXPECT_EQ(cli("train --delta 0.3").exit_code, 2);
  EXPECT_EQ(cli("train --no-such-flag").exit_code, 2);
  EXPECT_EQ(cli("train bogus=1").exit_code, 2);
  EXPECT_EQ(cli("train --config /nonexistent/exp.cfg").exit_code, 3);
  EXPECT_EQ(cli("train --out /proc/forbidden --rounds 2").exit_code, 3);
  auto r = cli("train --workers 0", true);
  EXPECT_NE(r.out.find("workers"), std::string::npos);
}

TEST(Cli, BitsTable) {
  auto r = cli("bits");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("8531.5"), std::string::npos);
  EXPECT_NE(r.out.find("422.6"), std::string::npos);
  EXPECT_NE(r.out.find("619.1"), std::string::npos);
  auto j = cli("bits --json");
  ASSERT_EQ(j.exit_code, 0);
  auto rows = nlohmann::json::parse(j.out);
  EXPECT_FALSE(rows.empty());
}

TEST(Cli, VerifyPassesAndNegativeControlFails) {
  auto dir = temp_dir("verify");
  auto ok = cli("verify --out " + dir.string());
  EXPECT_EQ(ok.exit_code, 0) << ok.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "verify_report.json"));
  auto bad = cli("verify --corrupt-dither --out " + dir.string(), true);
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.out.find("FAIL dither_uniformity"), std::string::npos) << bad.out;
  std::filesystem::remove_all(dir);
}

TEST(Cli, QuantizeBenchRuns) {
  auto r = cli("quantize-bench --n 1000 --repeats 3");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_FALSE(r.out.empty());
}

}  // namespace
