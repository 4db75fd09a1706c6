// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/plan.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "edgepipe/errors.h"

namespace edgepipe {

std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::kSgdMomentum:
      return "sgd-momentum";
    case Optimizer::kAdam:
      return "adam";
  }
  return "?";
}

std::string_view to_string(KPolicy k) {
  switch (k) {
    case KPolicy::kPaper:
      return "paper";
    case KPolicy::kA:
      return "a";
    case KPolicy::kB:
      return "b";
    case KPolicy::kC:
      return "c";
  }
  return "?";
}

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd-momentum") return Optimizer::kSgdMomentum;
  if (s == "adam") return Optimizer::kAdam;
  throw ParseError("unknown optimizer '" + std::string(s) + "'");
}

KPolicy parse_k_policy(std::string_view s) {
  if (s == "paper") return KPolicy::kPaper;
  if (s == "a") return KPolicy::kA;
  if (s == "b") return KPolicy::kB;
  if (s == "c") return KPolicy::kC;
  throw ParseError("unknown k-policy '" + std::string(s) + "'");
}

std::size_t PlanConfig::devices_used() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.devices.size();
  return n;
}

std::size_t PlanConfig::stage_of(std::size_t device) const {
  for (const auto& s : stages) {
    if (std::find(s.devices.begin(), s.devices.end(), device) != s.devices.end()) {
      return s.index;
    }
  }
  return static_cast<std::size_t>(-1);
}

void check_plan_structure(const PlanConfig& plan, std::size_t num_layers) {
  if (plan.stages.empty()) throw ValidationError("plan_stages", "plan has no stages");
  if (plan.micro_batches == 0 || plan.micro_batch_size == 0) {
    throw ValidationError("plan_batches", "M and B must be at least 1");
  }
  std::size_t next_layer = 0;
  std::set<std::size_t> seen;
  for (std::size_t p = 0; p < plan.stages.size(); ++p) {
    const auto& s = plan.stages[p];
    if (s.index != p) throw ValidationError("plan_stages", "stage indices must run 0..P-1");
    if (s.layers.first != next_layer || s.layers.last < s.layers.first) {
      throw ValidationError("plan_partition",
                            "stage " + std::to_string(p) +
                                " does not continue the layer partition");
    }
    next_layer = s.layers.last + 1;
    if (s.devices.empty()) {
      throw ValidationError("plan_groups", "stage " + std::to_string(p) + " has no devices");
    }
    for (auto d : s.devices) {
      if (!seen.insert(d).second) {
        throw ValidationError("plan_groups",
                              "device " + std::to_string(d) + " appears in two stages", d);
      }
    }
    if (s.allocation.size() != s.devices.size() ||
        std::accumulate(s.allocation.begin(), s.allocation.end(), std::size_t{0}) !=
            plan.micro_batch_size) {
      throw ValidationError("plan_allocation",
                            "stage " + std::to_string(p) +
                                " allocation does not sum to the micro-batch size");
    }
    if (s.k == 0) throw ValidationError("plan_k", "K must be at least 1");
  }
  if (next_layer != num_layers) {
    throw ValidationError("plan_partition", "stages do not cover every layer");
  }
  const auto& steps = plan.timeline.steps;
  if (!steps.empty()) {
    if (steps.size() != 2 * plan.stages.size() - 1) {
      throw ValidationError("timeline_alternation",
                            "timeline must hold 2P-1 alternating steps");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const bool exec = i % 2 == 0;
      if ((steps[i].kind == StepKind::kExecution) != exec || steps[i].stage != i / 2) {
        throw ValidationError("timeline_alternation",
                              "execution and communication steps must alternate");
      }
    }
    if (plan.timeline.dominant >= steps.size()) {
      throw ValidationError("timeline_dominant", "dominant step out of range");
    }
  }
}

}  // namespace edgepipe
