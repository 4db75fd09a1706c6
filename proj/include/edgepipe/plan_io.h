// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Plan files: a self-contained JSON document with everything simulate and
// inject-fault need, so neither has to re-run the planner.

#pragma once

#include <filesystem>
#include <string>

#include "edgepipe/plan.h"

namespace edgepipe {

inline constexpr int kPlanFormatVersion = 1;

std::string serialize_plan(const PlanConfig& plan);

// Throws ParseError on malformed input and ValidationError when the plan
// breaks a structural invariant.
PlanConfig parse_plan(const std::string& text);

PlanConfig load_plan(const std::filesystem::path& path);
void save_plan(const PlanConfig& plan, const std::filesystem::path& path);

}  // namespace edgepipe
