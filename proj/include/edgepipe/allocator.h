// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Splits one micro-batch across the devices replicating a stage so the
// slowest device finishes as early as possible without exceeding any
// device's memory budget. Two phases: capacity-proportional balancing under
// memory caps, then block-wise offloading from the straggler.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "edgepipe/plan.h"
#include "edgepipe/profile.h"
#include "edgepipe/units.h"

namespace edgepipe {

struct AllocationRequest {
  LayerRange layers;
  std::size_t micro_batch_size = 1;  // B
  std::size_t k = 1;                 // in-flight bound of the stage
  Optimizer optimizer = Optimizer::kSgdMomentum;
  std::size_t block_size = 1;
};

struct Allocation {
  std::vector<std::size_t> devices;
  std::vector<std::size_t> samples;  // aligned with devices
  std::size_t block_size = 1;
  std::size_t offload_moves = 0;     // accepted phase-2 moves

  std::size_t total() const;
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

// Largest per-device sample count whose stage footprint fits the device's
// budget, or none when even the weights do not fit.
std::optional<std::size_t> max_samples_in_budget(const WorkloadProfile& profile,
                                                 std::size_t device,
                                                 const AllocationRequest& req);

// FP+BP time of the range on `device` with `samples` samples.
Millis device_latency(const WorkloadProfile& profile, std::size_t device,
                      LayerRange layers, std::size_t samples);

// Slowest device of the allocation.
Millis max_latency(const WorkloadProfile& profile, const Allocation& a,
                   LayerRange layers);

// Phase 1. Throws InfeasibleAllocation when the group runs out of memory
// before all `samples` are placed.
Allocation memory_aware_balancing(const WorkloadProfile& profile,
                                  std::span<const std::size_t> group,
                                  const AllocationRequest& req,
                                  std::size_t samples);

// Phase 2. Never makes the straggler slower; returns the input when no
// block can move.
Allocation straggler_offloading(const WorkloadProfile& profile,
                                const Allocation& start,
                                const AllocationRequest& req);

struct StageCost {
  Allocation allocation;
  Millis fp_ms = 0.0;  // slowest device's FP
  Millis bp_ms = 0.0;  // slowest device's BP
};

StageCost allocate_microbatch(const WorkloadProfile& profile,
                              std::span<const std::size_t> group,
                              const AllocationRequest& req);

// FP/BP step times of an already chosen allocation.
StageCost stage_cost(const WorkloadProfile& profile, Allocation allocation,
                     LayerRange layers);

}  // namespace edgepipe
