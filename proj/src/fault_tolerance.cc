// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/fault_tolerance.h"

#include <algorithm>
#include <set>

#include "edgepipe/allocator.h"
#include "edgepipe/cost_model.h"
#include "edgepipe/errors.h"
#include "edgepipe/planner.h"

namespace edgepipe {

std::string_view to_string(DeviceStatus s) {
  switch (s) {
    case DeviceStatus::kAlive:
      return "alive";
    case DeviceStatus::kSuspected:
      return "suspected";
    case DeviceStatus::kProbing:
      return "probing";
    case DeviceStatus::kFailed:
      return "failed";
  }
  return "?";
}

LivenessState make_liveness(std::size_t num_devices, const LivenessConfig& config,
                            Millis start_ms) {
  LivenessState s;
  s.config = config;
  s.now_ms = start_ms;
  s.devices.assign(num_devices, DeviceLiveness{DeviceStatus::kAlive, start_ms, 0.0});
  return s;
}

namespace {

std::vector<bool> mark(std::span<const std::size_t> ids, std::size_t n, const char* what) {
  std::vector<bool> hit(n, false);
  for (auto d : ids) {
    if (d >= n) {
      throw ValidationError("device", std::string(what) + " from unknown device " +
                                          std::to_string(d), d);
    }
    hit[d] = true;
  }
  return hit;
}

}  // namespace

LivenessStep liveness_step(const LivenessState& state, Millis now_ms,
                           std::span<const std::size_t> heartbeats,
                           std::span<const std::size_t> probe_replies) {
  if (now_ms < state.now_ms) {
    throw ValidationError("clock", "liveness clock moved backwards");
  }
  const std::size_t n = state.devices.size();
  const auto beat = mark(heartbeats, n, "heartbeat");
  const auto reply = mark(probe_replies, n, "probe reply");
  const auto& cfg = state.config;

  LivenessStep out;
  out.state = state;
  out.state.now_ms = now_ms;
  for (std::size_t d = 0; d < n; ++d) {
    DeviceLiveness& dev = out.state.devices[d];
    const auto move = [&](DeviceStatus to) {
      out.changes.push_back({d, dev.status, to});
      dev.status = to;
    };
    if (dev.status == DeviceStatus::kFailed) continue;
    if (beat[d]) dev.last_heartbeat_ms = now_ms;

    if (dev.status == DeviceStatus::kAlive) {
      if (!beat[d] && now_ms - dev.last_heartbeat_ms >= cfg.suspect_timeout_ms) {
        move(DeviceStatus::kSuspected);
        dev.probe_sent_ms = now_ms;
      }
      continue;
    }
    if (dev.status == DeviceStatus::kSuspected) move(DeviceStatus::kProbing);
    if (beat[d] || reply[d]) {
      if (reply[d]) dev.last_heartbeat_ms = now_ms;
      move(DeviceStatus::kAlive);
    } else if (now_ms - dev.probe_sent_ms >= cfg.probe_timeout_ms) {
      move(DeviceStatus::kFailed);
      out.detected_failures.push_back(d);
    }
  }
  return out;
}

std::vector<StageBackup> assign_backups(const PlanConfig& plan, const WorkloadProfile& profile) {
  const std::size_t P = plan.stages.size();
  std::vector<StageBackup> out;
  for (std::size_t p = 0; p < P; ++p) {
    const auto& stage = plan.stages[p];
    if (stage.devices.size() > 1) {
      out.push_back({BackupKind::kIntraStage, std::nullopt});
      continue;
    }
    if (P == 1) {
      throw NoBackupTarget("the only stage runs on a single device and has nowhere to back up");
    }
    const auto& next = plan.stages[(p + 1) % P];
    std::optional<std::size_t> best;
    long double best_free = 0.0L;
    for (std::size_t i = 0; i < next.devices.size(); ++i) {
      const std::size_t d = next.devices[i];
      const std::size_t y = i < next.allocation.size() ? next.allocation[i] : 0;
      const auto mem = stage_memory(profile, next.layers, y, next.k, plan.optimizer);
      const long double free = static_cast<long double>(profile.devices[d].memory_budget_bytes) -
                               static_cast<long double>(mem.total_bytes);
      if (!best || free > best_free || (free == best_free && d < *best)) {
        best = d;
        best_free = free;
      }
    }
    out.push_back({BackupKind::kNextStageNode, best});
  }
  return out;
}

MigrationPlan migration_plan(std::span<const std::optional<std::size_t>> old_owner,
                             std::span<const std::size_t> new_owner,
                             const WorkloadProfile& profile) {
  MigrationPlan m;
  for (std::size_t l = 0; l < new_owner.size(); ++l) {
    if (!old_owner[l]) continue;
    std::size_t at = *old_owner[l];
    const std::size_t to = new_owner[l];
    const Bytes w = profile.layers[l].param_bytes;
    while (at != to) {
      const std::size_t next = at < to ? at + 1 : at - 1;
      m.ops.push_back({l, at, next, w});
      m.total_bytes += w;
      at = next;
    }
  }
  return m;
}

namespace {

std::vector<std::size_t> owners(std::span<const LayerRange> partition, std::size_t num_layers) {
  std::vector<std::size_t> owner(num_layers, 0);
  for (std::size_t p = 0; p < partition.size(); ++p) {
    for (std::size_t l = partition[p].first; l <= partition[p].last; ++l) owner.at(l) = p;
  }
  return owner;
}

}  // namespace

MigrationPlan migration_plan(std::span<const LayerRange> old_partition,
                             std::span<const LayerRange> new_partition,
                             const WorkloadProfile& profile) {
  if (old_partition.size() != new_partition.size()) {
    throw ValidationError("partition", "partitions must have the same number of stages");
  }
  const auto before = owners(old_partition, profile.num_layers());
  const std::vector<std::optional<std::size_t>> old_owner(before.begin(), before.end());
  return migration_plan(old_owner, owners(new_partition, profile.num_layers()), profile);
}

ReplayPlan replan_on_failure(const PlanConfig& plan, const WorkloadProfile& profile,
                             std::size_t failed_device) {
  const std::size_t failed_stage = plan.stage_of(failed_device);
  if (failed_stage >= plan.stages.size()) {
    throw ValidationError("device", "device " + std::to_string(failed_device) +
                                        " is not part of the plan", failed_device);
  }
  if (plan.devices_used() == 1) {
    throw NoSurvivingDevices("the failed device was the only one in the plan");
  }
  const std::size_t L = profile.num_layers();
  const auto backups = assign_backups(plan, profile);

  ReplayPlan r;
  r.failed_device = failed_device;
  r.failed_stage = failed_stage;

  // Surviving stages in order, with their new indices.
  std::vector<std::optional<std::size_t>> renumber(plan.stages.size());
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& s : plan.stages) {
    std::vector<std::size_t> g;
    for (auto d : s.devices) {
      if (d != failed_device) g.push_back(d);
    }
    if (g.empty()) {
      r.stage_removed = true;
      continue;
    }
    renumber[s.index] = groups.size();
    groups.push_back(std::move(g));
  }

  std::vector<double> shares;
  for (const auto& g : groups) {
    double v = 0.0;
    for (auto d : g) v += capacity(profile, d, {0, L - 1}, plan.micro_batch_size);
    shares.push_back(v);
  }
  r.new_partition = proportional_partition(profile, shares);

  std::vector<std::optional<std::size_t>> old_owner(L);
  for (const auto& s : plan.stages) {
    for (std::size_t l = s.layers.first; l <= s.layers.last; ++l) old_owner[l] = renumber[s.index];
  }
  const auto new_owner = owners(r.new_partition, L);
  r.migration = migration_plan(old_owner, new_owner, profile);

  if (r.stage_removed) {
    const std::size_t source = *backups[failed_stage].device;
    const auto& lost = plan.stages[failed_stage].layers;
    for (std::size_t l = lost.first; l <= lost.last; ++l) {
      const auto& g = groups[new_owner[l]];
      const bool local = std::find(g.begin(), g.end(), source) != g.end();
      const Bytes b = local ? 0 : profile.layers[l].param_bytes;
      r.restores.push_back({l, source, new_owner[l], b});
      r.restore_bytes += b;
    }
  }

  PlanConfig& np = r.new_plan;
  np.model_name = plan.model_name;
  np.micro_batches = plan.micro_batches;
  np.micro_batch_size = plan.micro_batch_size;
  np.k_policy = plan.k_policy;
  np.optimizer = plan.optimizer;
  np.block_size = plan.block_size;
  const std::size_t P = groups.size();
  for (std::size_t p = 0; p < P; ++p) {
    StageSpec s;
    s.index = p;
    s.layers = r.new_partition[p];
    s.devices = groups[p];
    s.k = kp_for_policy(plan.k_policy, P, p);
    np.stages.push_back(std::move(s));
  }
  for (auto& s : np.stages) {
    AllocationRequest req{s.layers, plan.micro_batch_size, s.k, plan.optimizer, plan.block_size};
    try {
      s.allocation = allocate_microbatch(profile, s.devices, req).allocation.samples;
    } catch (const InfeasibleAllocation& e) {
      r.feasible = false;
      r.infeasible_stage = s.index;
      r.infeasible_reason = e.what();
      return r;
    }
  }
  np = estimate_plan(profile, std::move(np));
  return r;
}

ReplayPlan replan_on_failure(const PlanConfig& plan, const WorkloadProfile& profile,
                             std::span<const std::size_t> failed_devices) {
  const std::set<std::size_t> distinct(failed_devices.begin(), failed_devices.end());
  if (distinct.size() != 1) {
    throw ValidationError("single_failure",
                          "replay handles exactly one failed device, got " +
                              std::to_string(distinct.size()));
  }
  return replan_on_failure(plan, profile, *distinct.begin());
}

Bytes heavy_rescheduling_bytes(const PlanConfig& plan, const WorkloadProfile& profile,
                               std::size_t failed_device) {
  const std::size_t failed_stage = plan.stage_of(failed_device);
  if (failed_stage >= plan.stages.size()) {
    throw ValidationError("device", "device " + std::to_string(failed_device) +
                                        " is not part of the plan", failed_device);
  }
  const std::size_t L = profile.num_layers();
  const auto backups = assign_backups(plan, profile);
  std::vector<std::set<std::size_t>> holders(L);
  for (const auto& s : plan.stages) {
    std::set<std::size_t> h;
    for (auto d : s.devices) {
      if (d != failed_device) h.insert(d);
    }
    if (h.empty()) h.insert(*backups[s.index].device);
    for (std::size_t l = s.layers.first; l <= s.layers.last; ++l) holders[l] = h;
  }

  PlannerOptions o;
  o.micro_batches = plan.micro_batches;
  o.micro_batch_size = plan.micro_batch_size;
  o.k_policy = plan.k_policy;
  o.optimizer = plan.optimizer;
  o.block_size = plan.block_size;
  o.excluded_devices = {failed_device};
  Bytes bytes = 0;
  PlanConfig fresh;
  try {
    fresh = edgepipe::plan(profile, o);
  } catch (const NoFeasiblePlan&) {
    // Nothing to compare against: every layer has to be placed again.
    for (const auto& l : profile.layers) bytes += l.param_bytes;
    return bytes;
  }
  for (const auto& s : fresh.stages) {
    const std::set<std::size_t> g(s.devices.begin(), s.devices.end());
    for (std::size_t l = s.layers.first; l <= s.layers.last; ++l) {
      if (g != holders[l]) bytes += profile.layers[l].param_bytes;
    }
  }
  return bytes;
}

}  // namespace edgepipe
