// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "edgepipe/plan_io.h"
#include "edgepipe/profile.h"
#include "json.hpp"

namespace edgepipe {
namespace {

namespace fs = std::filesystem;
const fs::path kFixtures = fs::path(EDGEPIPE_TEST_DATA) / "fixtures";
const std::string kCnn = (kFixtures / "cnn4_profile.json").string();

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "edgepipe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("edgepipe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, PlanWritesAPlanFile) {
  const auto r = cli({"plan", "--profile", kCnn, "-M", "8", "-B", "8", "--out", path("p.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto plan = load_plan(path("p.json"));
  EXPECT_EQ(plan.num_stages(), 2u);
  EXPECT_GT(plan.estimated_round_latency_ms, 0.0);
  EXPECT_NE(r.out.find("estimated round latency"), std::string::npos);
}

TEST_F(CliTest, MachineOutputIsStable) {
  const std::vector<std::string> args = {"plan", "--profile", kCnn, "-M", "4", "-B", "4",
                                         "--format", "machine", "--seed", "7"};
  const auto a = cli(args);
  const auto b = cli(args);
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NO_THROW(parse_plan(a.out));
}

TEST_F(CliTest, SimulateRejectsOtherMicroBatchCount) {
  ASSERT_EQ(cli({"plan", "--profile", kCnn, "-M", "4", "-B", "4", "--out", path("p.json")}).code,
            kExitOk);
  const auto r = cli({"simulate", "--plan", path("p.json"), "-M", "5"});
  EXPECT_EQ(r.code, kExitInvalid);
  EXPECT_NE(r.err.find("micro_batches"), std::string::npos);
  EXPECT_EQ(cli({"simulate", "--plan", path("p.json"), "-M", "4"}).code, kExitOk);
}

TEST_F(CliTest, SimulateWritesReportAndEvents) {
  ASSERT_EQ(cli({"plan", "--profile", kCnn, "-M", "4", "-B", "4", "--out", path("p.json")}).code,
            kExitOk);
  const auto r = cli({"simulate", "--plan", path("p.json"), "--events", path("e.csv"), "--out",
                      path("r.json"), "--format", "machine"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(read_text_file(path("r.json")));
  EXPECT_EQ(report["kind"], "simulation");
  EXPECT_EQ(report["link_model"], "half-duplex");
  EXPECT_TRUE(report["estimate_within_simulation"].get<bool>());
  EXPECT_EQ(read_text_file(path("e.csv")).rfind("step,micro_batch,kind,start_ms,end_ms\n", 0), 0u);
}

TEST_F(CliTest, CompareShowsHdpAboveHpp) {
  const auto r = cli({"compare", "--profile", kCnn, "-M", "8", "-B", "8", "--format", "machine"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_TRUE(report["hdp_exceeds_hpp"].get<bool>());
  EXPECT_GT(report["volume_bytes"]["hdp"].get<double>(), report["volume_bytes"]["hpp"].get<double>());
  EXPECT_EQ(cli({"compare", "--profile", kCnn}).code, kExitInvalid);
}

TEST_F(CliTest, InjectFaultReplaysThePipeline) {
  ASSERT_EQ(cli({"plan", "--profile", kCnn, "-M", "8", "-B", "8", "--out", path("p.json")}).code,
            kExitOk);
  const auto r = cli({"inject-fault", "--profile", kCnn, "--plan", path("p.json"), "--device", "3",
                      "--fault-time", "1000", "--new-plan", path("n.json"), "--format", "machine"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report["detected_at_ms"].get<double>(), 1400.0);
  EXPECT_TRUE(report["feasible"].get<bool>());
  EXPECT_EQ(load_plan(path("n.json")).devices_used(), 3u);
  EXPECT_EQ(cli({"simulate", "--plan", path("n.json")}).code, kExitOk);
}

TEST_F(CliTest, InvalidProfileListsViolations) {
  auto p = load_profile(kCnn);
  p.devices[2].fp_time_ms[4][2] = 0.0;
  p.devices[3].bp_time_ms[1][0] = -1.0;
  write_text_file(path("bad.json"), serialize_profile(p));
  const auto r = cli({"validate-profile", "--profile", path("bad.json"), "--format", "machine"});
  EXPECT_EQ(r.code, kExitInvalid);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_GE(report["violations"].size(), 2u);
  EXPECT_EQ(cli({"plan", "--profile", path("bad.json"), "-M", "2", "-B", "2"}).code,
            kExitInvalid);
}

TEST_F(CliTest, BadArgumentsExitWithOne) {
  EXPECT_EQ(cli({"plan", "--profile", kCnn}).code, kExitInvalid);
  EXPECT_EQ(cli({"plan", "--profile", kCnn, "-M", "0", "-B", "2"}).code, kExitInvalid);
  EXPECT_EQ(cli({"plan", "--profile", kCnn, "-M", "2", "-B", "64"}).code, kExitInvalid);
  EXPECT_EQ(cli({"plan", "--profile", path("missing.json"), "-M", "2", "-B", "2"}).code,
            kExitInvalid);
  EXPECT_EQ(cli({"bogus"}).code, kExitInvalid);
  EXPECT_EQ(cli({}).code, kExitInvalid);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, OnlyDeclaredOutputsAreWritten) {
  const auto cwd = fs::current_path();
  fs::current_path(dir_);
  EXPECT_EQ(cli({"plan", "--profile", kCnn, "-M", "4", "-B", "4"}).code, kExitOk);
  EXPECT_EQ(cli({"compare", "--profile", kCnn, "-M", "4", "-B", "4"}).code, kExitOk);
  fs::current_path(cwd);
  EXPECT_TRUE(fs::is_empty(dir_));
}

}  // namespace
}  // namespace edgepipe
