// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event replay of one training round of a plan under 1F1B with
// per-stage in-flight bounds. Every step of the timeline is a resource
// that runs one transfer or computation at a time.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "edgepipe/plan.h"
#include "edgepipe/units.h"

namespace edgepipe {

enum class EventKind { kForward, kBackward, kForwardComm, kBackwardComm, kAllReduce };

std::string_view to_string(EventKind k);

struct SimEvent {
  std::size_t step = 0;
  long micro_batch = 0;  // -1 for AllReduce
  EventKind kind = EventKind::kForward;
  Millis start_ms = 0.0;
  Millis end_ms = 0.0;

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

struct SimOptions {
  // Communication steps carry forward and backward traffic concurrently.
  // Off by default: the latency estimate assumes each step serializes its
  // 2M transfers, and a full-duplex link can beat that.
  bool full_duplex = false;
};

struct SimResult {
  std::vector<SimEvent> events;  // in start order
  Millis round_latency_ms = 0.0;
  std::vector<Millis> bubble_ms;  // per step, see bubble_count
  std::vector<Millis> idle_ms;    // per step: round latency minus busy time
  std::vector<std::size_t> peak_resident_microbatches;  // per stage
  std::vector<Bytes> peak_memory_bytes;                 // per stage, worst device
  std::vector<Bytes> peak_activation_bytes;             // per stage, worst device

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

// Uses the stage times stored in the plan; plan.micro_batches is M.
SimResult simulate_round(const PlanConfig& plan, const SimOptions& options = {});

// Rejects an M that differs from the plan's with ValidationError.
SimResult simulate_round(const PlanConfig& plan, std::size_t micro_batches,
                         const SimOptions& options = {});

// Idle time on `step` between its first event start and its last FP/BP or
// transfer end. AllReduce is not counted.
Millis bubble_count(const SimResult& result, std::size_t step);

struct EstimateReport {
  Millis estimated_ms = 0.0;
  Millis simulated_ms = 0.0;
  Millis gap_ms = 0.0;        // simulated - estimated
  double relative_gap = 0.0;  // gap / simulated
  std::vector<Millis> bubble_ms;
};

// Throws EstimateExceedsSimulation when the estimate is above the
// simulated latency by more than the latency tolerance.
EstimateReport validate_estimate(const PlanConfig& plan, const SimResult& result);

// One line per event: step,micro_batch,kind,start_ms,end_ms.
std::string events_csv(const SimResult& result);

}  // namespace edgepipe
