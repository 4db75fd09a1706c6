// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/plan_io.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "edgepipe/errors.h"
#include "edgepipe/planner.h"
#include "edgepipe/profile.h"

namespace edgepipe {
namespace {

const std::filesystem::path kFixtures = std::filesystem::path(EDGEPIPE_TEST_DATA) / "fixtures";

PlanConfig fixture_plan() {
  const auto p = load_profile(kFixtures / "envb_profile.json");
  PlannerOptions o;
  o.micro_batches = 16;
  o.micro_batch_size = 16;
  o.optimizer = Optimizer::kAdam;
  return plan(p, o);
}

TEST(PlanIoTest, RoundTrip) {
  const auto plan = fixture_plan();
  const auto text = serialize_plan(plan);
  EXPECT_EQ(parse_plan(text), plan);
  EXPECT_EQ(serialize_plan(parse_plan(text)), text);
}

TEST(PlanIoTest, FileRoundTrip) {
  const auto plan = fixture_plan();
  const auto path = std::filesystem::temp_directory_path() / "edgepipe_plan_io_test.json";
  save_plan(plan, path);
  EXPECT_EQ(load_plan(path), plan);
  std::filesystem::remove(path);
}

TEST(PlanIoTest, RejectsOtherVersions) {
  auto text = serialize_plan(fixture_plan());
  text.replace(text.find("\"format_version\": 1"), 19, "\"format_version\": 2");
  EXPECT_THROW(parse_plan(text), ParseError);
  EXPECT_THROW(parse_plan("[]"), ParseError);
}

TEST(PlanIoTest, RejectsBrokenStructure) {
  auto plan = fixture_plan();
  plan.stages[0].allocation[0] += 1;
  EXPECT_THROW(parse_plan(serialize_plan(plan)), ValidationError);

  plan = fixture_plan();
  plan.timeline.steps.clear();
  EXPECT_THROW(parse_plan(serialize_plan(plan)), ValidationError);
}

}  // namespace
}  // namespace edgepipe
