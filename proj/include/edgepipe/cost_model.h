// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form costs: stage memory footprint, ring AllReduce time, the
// waiting/execution/AllReduce phase decomposition of one training round,
// and the communication-volume analytics for DP/PP/HDP/HPP layouts.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "edgepipe/plan.h"
#include "edgepipe/profile.h"
#include "edgepipe/units.h"

namespace edgepipe {

std::size_t kp_default(std::size_t num_stages, std::size_t stage);
std::size_t kp_for_policy(KPolicy policy, std::size_t num_stages,
                          std::size_t stage);

// Optimizer state as a multiple of the parameter bytes.
std::size_t optimizer_state_multiplier(Optimizer optimizer);

struct MemoryBreakdown {
  Bytes model_bytes = 0;      // parameters + accumulated gradients
  Bytes optimizer_bytes = 0;
  Bytes activation_bytes_per_microbatch = 0;
  std::size_t k = 0;
  Bytes total_bytes = 0;
};

MemoryBreakdown stage_memory(const WorkloadProfile& profile, LayerRange layers,
                             std::size_t samples, std::size_t k,
                             Optimizer optimizer);

// Ring AllReduce of the range's gradients across `group`, bounded by the
// slowest link inside the group. Zero for a single device.
Millis allreduce_time(const WorkloadProfile& profile,
                      std::span<const std::size_t> group, LayerRange layers);

// Slowest link between any device of `a` and any device of `b`.
double min_bandwidth_between(const WorkloadProfile& profile,
                             std::span<const std::size_t> a,
                             std::span<const std::size_t> b);

// One direction of a communication step: the boundary tensor of
// `boundary_layer` for a whole micro-batch over the slowest cross link.
// Activations and their gradients are the same size, so FP and BP match.
Millis boundary_transfer_time(const WorkloadProfile& profile,
                              std::size_t boundary_layer,
                              std::size_t micro_batch_size,
                              std::span<const std::size_t> upstream,
                              std::span<const std::size_t> downstream);

Millis waiting_time(const StepTimeline& timeline, std::size_t step);
Millis exec_phase_time(const StepTimeline& timeline, std::size_t step);

// M x (E_f+E_b) of `step` plus everything that must run ahead of it:
// the length of the step's compact block after alignment.
Millis aligned_step_total(const StepTimeline& timeline, std::size_t step);

struct RoundLatency {
  Millis latency_ms = 0.0;
  std::size_t critical_step = 0;  // argmax, lowest index on ties
};

// max over steps of waiting + execution + AllReduce phases. `allreduce_ms`
// is aligned with timeline.steps (zero for communication steps).
RoundLatency round_latency(const StepTimeline& timeline,
                           std::span<const Millis> allreduce_ms);

// Bytes moved per round by an HPP plan: ring AllReduce inside every group
// plus activations and gradients at each stage boundary for M x B samples.
Bytes comm_volume_hpp(const PlanConfig& plan, const WorkloadProfile& profile);

// One HDP group: a pipeline over cuts.size()+1 devices processing `batch`
// samples, cut after each listed layer.
struct HdpGroup {
  std::vector<std::size_t> cut_after;
  std::size_t batch = 0;
};

// Parameter-server synchronisation of the full model per group (when there
// is more than one group) plus each group's internal pipeline traffic.
Bytes comm_volume_hdp(std::span<const HdpGroup> groups,
                      const WorkloadProfile& profile);

}  // namespace edgepipe
