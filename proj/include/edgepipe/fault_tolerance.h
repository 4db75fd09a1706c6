// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline replay after a single device failure: a logical-clock heartbeat
// detector, per-stage backup placement, capacity-proportional repartition
// of the surviving stages and the adjacent-stage layer moves it implies.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgepipe/plan.h"
#include "edgepipe/profile.h"
#include "edgepipe/units.h"

namespace edgepipe {

enum class DeviceStatus { kAlive, kSuspected, kProbing, kFailed };

std::string_view to_string(DeviceStatus s);

struct LivenessConfig {
  Millis heartbeat_interval_ms = 100.0;
  Millis suspect_timeout_ms = 300.0;
  Millis probe_timeout_ms = 200.0;
};

struct DeviceLiveness {
  DeviceStatus status = DeviceStatus::kAlive;
  Millis last_heartbeat_ms = 0.0;
  Millis probe_sent_ms = 0.0;  // meaningful while Suspected or Probing

  friend bool operator==(const DeviceLiveness&, const DeviceLiveness&) = default;
};

struct LivenessState {
  LivenessConfig config;
  Millis now_ms = 0.0;
  std::vector<DeviceLiveness> devices;
};

// Every device Alive with a heartbeat at `start_ms`.
LivenessState make_liveness(std::size_t num_devices, const LivenessConfig& config,
                            Millis start_ms = 0.0);

struct StatusChange {
  std::size_t device = 0;
  DeviceStatus from = DeviceStatus::kAlive;
  DeviceStatus to = DeviceStatus::kAlive;
};

struct LivenessStep {
  LivenessState state;
  std::vector<std::size_t> detected_failures;
  std::vector<StatusChange> changes;  // in order, several per device possible
};

// Advances the detector to `now_ms`.
//   Alive:      a heartbeat refreshes it; silence for suspect_timeout makes it
//               Suspected and sends a probe at now.
//   Suspected:  moves to Probing at the next step.
//   Probing:    a probe reply or heartbeat makes it Alive; no answer for
//               probe_timeout after the probe makes it Failed.
//   Failed:     final; later messages are ignored.
// Throws ValidationError when the clock goes backwards.
LivenessStep liveness_step(const LivenessState& state, Millis now_ms,
                           std::span<const std::size_t> heartbeats,
                           std::span<const std::size_t> probe_replies);

enum class BackupKind { kIntraStage, kNextStageNode };

struct StageBackup {
  BackupKind kind = BackupKind::kIntraStage;
  std::optional<std::size_t> device;  // set for kNextStageNode

  friend bool operator==(const StageBackup&, const StageBackup&) = default;
};

// Multi-device stages restore from their own replicas. A single-device
// stage backs up to the device of the next stage (last wraps to first)
// with the most memory left after that device's own stage footprint,
// lowest id on ties. Throws NoBackupTarget for a one-device, one-stage plan.
std::vector<StageBackup> assign_backups(const PlanConfig& plan, const WorkloadProfile& profile);

struct MigrationOp {
  std::size_t layer = 0;
  std::size_t from_stage = 0;  // in the new plan's stage numbering
  std::size_t to_stage = 0;    // always from_stage +/- 1
  Bytes bytes = 0;

  friend bool operator==(const MigrationOp&, const MigrationOp&) = default;
};

struct MigrationPlan {
  std::vector<MigrationOp> ops;
  Bytes total_bytes = 0;
};

// One op per hop for every layer whose stage changes between the two
// partitions, which must have the same number of stages.
MigrationPlan migration_plan(std::span<const LayerRange> old_partition,
                             std::span<const LayerRange> new_partition,
                             const WorkloadProfile& profile);

// Same, over per-layer owners. Layers without an old owner are skipped:
// they are restored, not migrated.
MigrationPlan migration_plan(std::span<const std::optional<std::size_t>> old_owner,
                             std::span<const std::size_t> new_owner,
                             const WorkloadProfile& profile);

struct RestoreOp {
  std::size_t layer = 0;
  std::size_t source_device = 0;
  std::size_t to_stage = 0;  // new numbering
  Bytes bytes = 0;           // zero when the source already serves that stage

  friend bool operator==(const RestoreOp&, const RestoreOp&) = default;
};

struct ReplayPlan {
  std::size_t failed_device = 0;
  std::size_t failed_stage = 0;  // old numbering
  bool stage_removed = false;
  std::vector<LayerRange> new_partition;
  std::vector<RestoreOp> restores;
  MigrationPlan migration;
  Bytes restore_bytes = 0;
  // Stages, groups and layers always; allocations, timeline and latency
  // only when `feasible`.
  PlanConfig new_plan;
  bool feasible = true;
  std::optional<std::size_t> infeasible_stage;
  std::string infeasible_reason;
};

// Throws NoSurvivingDevices when the failed device was the only one, and
// ValidationError when it is not in the plan.
ReplayPlan replan_on_failure(const PlanConfig& plan, const WorkloadProfile& profile,
                             std::size_t failed_device);

// Rejects simultaneous failures with ValidationError; otherwise as above.
ReplayPlan replan_on_failure(const PlanConfig& plan, const WorkloadProfile& profile,
                             std::span<const std::size_t> failed_devices);

// Bytes a full re-plan would move: for every layer whose device group in a
// fresh plan() over the survivors differs from the devices holding it after
// the failure, the layer's parameters once.
Bytes heavy_rescheduling_bytes(const PlanConfig& plan, const WorkloadProfile& profile,
                               std::size_t failed_device);

}  // namespace edgepipe
