// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Dynamic-programming search over layer partitions, contiguous device runs
// and per-stage micro-batch splits, minimizing the estimated round latency.
// Also scores externally built plans (baselines, replayed plans) with the
// same cost model.

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "edgepipe/cost_model.h"
#include "edgepipe/plan.h"
#include "edgepipe/profile.h"
#include "edgepipe/units.h"

namespace edgepipe {

struct PlannerOptions {
  std::size_t micro_batches = 1;     // M
  std::size_t micro_batch_size = 1;  // B
  KPolicy k_policy = KPolicy::kPaper;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  std::size_t block_size = 1;
  // Keep every non-dominated sub-pipeline per DP cell. With false, each cell
  // keeps only its lowest-latency sub-pipeline, which can miss the optimum.
  bool pareto = true;
  // Devices the search must not use (failed or reserved).
  std::vector<std::size_t> excluded_devices;
};

// Memory budget descending, then id ascending. Stage 0 takes the earliest
// run of this order.
std::vector<std::size_t> order_devices(const WorkloadProfile& profile);
std::vector<std::size_t> order_devices(const WorkloadProfile& profile,
                                       std::span<const std::size_t> excluded);

// What a pipeline needs to be extended at its head in O(1):
//   aligned  = max over steps k of M*(E_f^k+E_b^k) + sum_{i<k}(E_f^i+E_b^i)
//   slack    = max over steps k of T_a^k - sum_{i<k} E_b^i
// The round latency of the pipeline is aligned + slack.
struct PipelineSummary {
  std::size_t num_steps = 0;
  std::size_t dominant = 0;
  Millis aligned = 0.0;
  Millis slack = 0.0;

  Millis latency() const { return aligned + slack; }
};

// Prepends one stage (its execution step and the communication step that
// links it to the old head) to `sub`. With an empty `sub`, `comm` is
// ignored and the result is a one-step pipeline. `exec_allreduce_ms` is the
// new stage's AllReduce time.
PipelineSummary prepend_stage(const PipelineSummary& sub, const Step& exec,
                              const Step& comm, Millis exec_allreduce_ms,
                              std::size_t micro_batches);

// Index of the dominant step after prepending `exec` and `comm` to `sub`
// (indices counted from the new head). On ties the old dominant step is
// kept, then the new execution step wins over the new communication step.
std::size_t update_dominant(const PipelineSummary& sub, const Step& exec,
                            const Step& comm, std::size_t micro_batches);

// Same, for a materialized sub-timeline.
std::size_t update_dominant(const StepTimeline& sub, const Step& exec,
                            const Step& comm);

PlanConfig plan(const WorkloadProfile& profile, const PlannerOptions& options);

// Fills the derived per-stage fields, the timeline and the estimated
// latency of a plan whose layers, groups, allocations and K are set.
// Throws InfeasibleAllocation when a device exceeds its memory budget.
PlanConfig estimate_plan(const WorkloadProfile& profile, PlanConfig plan);

// Builds and scores a plan from (layers, group) pairs given head first,
// allocating every stage with the allocator and K from options.k_policy.
PlanConfig build_plan(const WorkloadProfile& profile, const PlannerOptions& options,
                      std::span<const std::pair<LayerRange, std::vector<std::size_t>>> stages);

// Splits the layers into shares.size() contiguous nonempty ranges whose
// FLOPs follow `shares`: each cut is the boundary closest to its cumulative
// target, ties to the earlier boundary. Requires 1 <= shares.size() <= L.
std::vector<LayerRange> proportional_partition(const WorkloadProfile& profile,
                                               std::span<const double> shares);

// One stage over every device.
PlanConfig pure_dp_plan(const WorkloadProfile& profile, const PlannerOptions& options);

// min(L, N) single-device stages over the memory order, equal-FLOPs cuts.
PlanConfig pure_pp_plan(const WorkloadProfile& profile, const PlannerOptions& options);

// `num_groups` HDP groups over the memory order, as even as possible, each
// pipelining the whole model with equal-FLOPs cuts. The M x B samples are
// split in proportion to group size.
std::vector<HdpGroup> hdp_layout(const WorkloadProfile& profile,
                                 std::size_t num_groups, std::size_t samples);

}  // namespace edgepipe
