// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Value types describing a hybrid-pipeline configuration: stages (layer
// range + replicated device group + per-device micro-batch split) and the
// alternating execution/communication step timeline derived from them.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/profile.h"
#include "edgepipe/units.h"

namespace edgepipe {

enum class Optimizer { kSgdMomentum, kAdam };

// How many forward passes stage p may run ahead before strict 1F1B.
//   kPaper: 2(P-p)-1   kA: 2(P-p)   kB: P-p   kC: 2(P-p)+1
enum class KPolicy { kPaper, kA, kB, kC };

std::string_view to_string(Optimizer o);
std::string_view to_string(KPolicy k);
Optimizer parse_optimizer(std::string_view s);
KPolicy parse_k_policy(std::string_view s);

struct StageSpec {
  std::size_t index = 0;
  LayerRange layers;
  std::vector<std::size_t> devices;     // device group
  std::vector<std::size_t> allocation;  // samples per micro-batch, per device
  std::size_t k = 1;                    // in-flight micro-batch bound

  // Derived from the profile when the plan is built; carried so a plan file
  // can be simulated without the profile.
  Millis fp_ms = 0.0;
  Millis bp_ms = 0.0;
  Millis allreduce_ms = 0.0;
  Bytes param_bytes = 0;
  Bytes activation_bytes_per_sample = 0;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

enum class StepKind { kExecution, kCommunication };

struct Step {
  StepKind kind = StepKind::kExecution;
  // Execution: the stage index. Communication: the upstream stage index.
  std::size_t stage = 0;
  Millis fp_ms = 0.0;
  Millis bp_ms = 0.0;

  Millis total() const { return fp_ms + bp_ms; }
  friend bool operator==(const Step&, const Step&) = default;
};

struct StepTimeline {
  std::vector<Step> steps;
  std::size_t dominant = 0;
  std::size_t micro_batches = 1;     // M
  std::size_t micro_batch_size = 1;  // B

  std::size_t size() const { return steps.size(); }
  friend bool operator==(const StepTimeline&, const StepTimeline&) = default;
};

struct PlanConfig {
  std::string model_name;
  std::size_t micro_batches = 1;     // M
  std::size_t micro_batch_size = 1;  // B
  KPolicy k_policy = KPolicy::kPaper;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  std::size_t block_size = 1;
  std::vector<StageSpec> stages;
  StepTimeline timeline;
  Millis estimated_round_latency_ms = 0.0;

  std::size_t num_stages() const { return stages.size(); }
  std::size_t devices_used() const;
  // Stage index holding `device`, or npos.
  std::size_t stage_of(std::size_t device) const;

  friend bool operator==(const PlanConfig&, const PlanConfig&) = default;
};

// Structural checks that need no profile: stages tile the layers in order,
// groups are disjoint and nonempty, allocations sum to B, timeline
// alternates. Throws ValidationError.
void check_plan_structure(const PlanConfig& plan, std::size_t num_layers);

}  // namespace edgepipe
