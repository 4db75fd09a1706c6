// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/allocator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edgepipe/cost_model.h"
#include "edgepipe/errors.h"

namespace edgepipe {

std::size_t Allocation::total() const {
  return std::accumulate(samples.begin(), samples.end(), std::size_t{0});
}

std::optional<std::size_t> max_samples_in_budget(const WorkloadProfile& profile,
                                                 std::size_t device,
                                                 const AllocationRequest& req) {
  const Bytes budget = profile.devices[device].memory_budget_bytes;
  const MemoryBreakdown fixed = stage_memory(profile, req.layers, 0, req.k, req.optimizer);
  if (fixed.total_bytes > budget) return std::nullopt;
  const Bytes per_sample = req.k * activation_bytes(profile, req.layers);
  const std::size_t grid_cap = profile.max_batch();
  if (per_sample == 0) return grid_cap;
  return std::min<std::size_t>(grid_cap, (budget - fixed.total_bytes) / per_sample);
}

Millis device_latency(const WorkloadProfile& profile, std::size_t device,
                      LayerRange layers, std::size_t samples) {
  return exec_time(profile, device, layers, Phase::kForward, samples) +
         exec_time(profile, device, layers, Phase::kBackward, samples);
}

Millis max_latency(const WorkloadProfile& profile, const Allocation& a,
                   LayerRange layers) {
  Millis worst = 0.0;
  for (std::size_t i = 0; i < a.devices.size(); ++i) {
    worst = std::max(worst, device_latency(profile, a.devices[i], layers, a.samples[i]));
  }
  return worst;
}

namespace {

std::vector<std::size_t> sample_caps(const WorkloadProfile& profile,
                                     std::span<const std::size_t> group,
                                     const AllocationRequest& req) {
  std::vector<std::size_t> caps;
  caps.reserve(group.size());
  for (auto d : group) {
    const auto cap = max_samples_in_budget(profile, d, req);
    if (!cap) {
      throw InfeasibleAllocation("device " + std::to_string(d) +
                                 " cannot hold the weights of layers " +
                                 std::to_string(req.layers.first) + ".." +
                                 std::to_string(req.layers.last));
    }
    caps.push_back(*cap);
  }
  return caps;
}

// Index of the extreme element of `values` over the positions accepted by
// `eligible`, ties to the lowest device id.
template <typename Better, typename Eligible>
std::optional<std::size_t> pick(const std::vector<Millis>& values,
                                const std::vector<std::size_t>& ids,
                                Better better, Eligible eligible) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!eligible(i)) continue;
    if (!best || better(values[i], values[*best]) ||
        (values[i] == values[*best] && ids[i] < ids[*best])) {
      best = i;
    }
  }
  return best;
}

}  // namespace

Allocation memory_aware_balancing(const WorkloadProfile& profile,
                                  std::span<const std::size_t> group,
                                  const AllocationRequest& req,
                                  std::size_t samples) {
  if (group.empty()) throw InfeasibleAllocation("empty device group");
  const std::size_t n = group.size();
  Allocation a;
  a.devices.assign(group.begin(), group.end());
  a.samples.assign(n, 0);
  a.block_size = req.block_size;
  if (samples == 0) return a;

  std::vector<std::size_t> room = sample_caps(profile, group, req);
  // Capacities are taken once, at the full micro-batch size.
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = capacity(profile, group[i], req.layers, req.micro_batch_size);
  }
  // Remainder order: descending capacity, then ascending id.
  std::vector<std::size_t> by_capacity(n);
  std::iota(by_capacity.begin(), by_capacity.end(), 0);
  std::sort(by_capacity.begin(), by_capacity.end(), [&](std::size_t x, std::size_t y) {
    if (v[x] != v[y]) return v[x] > v[y];
    return group[x] < group[y];
  });

  std::vector<bool> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = room[i] > 0;
  std::size_t left = samples;
  while (left > 0) {
    long double total_v = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) total_v += v[i];
    }
    if (total_v == 0.0L) {
      throw InfeasibleAllocation("group memory exhausted with " + std::to_string(left) +
                                 " samples left for layers " +
                                 std::to_string(req.layers.first) + ".." +
                                 std::to_string(req.layers.last));
    }
    std::vector<std::size_t> share(n, 0);
    std::size_t handed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      // The epsilon absorbs rounding in v_i / sum(v) for exact ratios.
      const long double exact = static_cast<long double>(v[i]) / total_v * left;
      share[i] = static_cast<std::size_t>(std::floor(exact + 1e-9L));
      handed += share[i];
    }
    for (std::size_t idx = 0; handed < left && idx < n; ++idx) {
      const std::size_t i = by_capacity[idx];
      if (!active[i]) continue;
      ++share[i];
      ++handed;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const std::size_t give = std::min(share[i], room[i]);
      a.samples[i] += give;
      room[i] -= give;
      left -= give;
      if (room[i] == 0) active[i] = false;
    }
  }
  return a;
}

Allocation straggler_offloading(const WorkloadProfile& profile,
                                const Allocation& start,
                                const AllocationRequest& req) {
  Allocation a = start;
  a.block_size = req.block_size;
  a.offload_moves = 0;
  const std::size_t n = a.devices.size();
  if (n < 2 || req.block_size == 0) return a;

  std::vector<std::size_t> room = sample_caps(profile, a.devices, req);
  for (std::size_t i = 0; i < n; ++i) room[i] -= std::min(room[i], a.samples[i]);

  std::vector<Millis> lat(n);
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = device_latency(profile, a.devices[i], req.layers, a.samples[i]);
  }
  while (true) {
    const std::size_t straggler =
        *pick(lat, a.devices, std::greater<>(), [](std::size_t) { return true; });
    // Only whole blocks move.
    const std::size_t moved = req.block_size;
    if (a.samples[straggler] < moved) break;
    const auto target = pick(lat, a.devices, std::less<>(), [&](std::size_t i) {
      return i != straggler && room[i] >= moved;
    });
    if (!target) break;
    const Millis old_worst = lat[straggler];
    const Millis old_s = lat[straggler];
    const Millis old_t = lat[*target];

    a.samples[straggler] -= moved;
    a.samples[*target] += moved;
    lat[straggler] = device_latency(profile, a.devices[straggler], req.layers,
                                    a.samples[straggler]);
    lat[*target] = device_latency(profile, a.devices[*target], req.layers,
                                  a.samples[*target]);
    const Millis new_worst = *std::max_element(lat.begin(), lat.end());
    if (new_worst < old_worst) {
      room[straggler] += moved;
      room[*target] -= moved;
      ++a.offload_moves;
      continue;
    }
    // The move produced a straggler no faster than before: undo it.
    a.samples[straggler] += moved;
    a.samples[*target] -= moved;
    lat[straggler] = old_s;
    lat[*target] = old_t;
    break;
  }
  return a;
}

StageCost stage_cost(const WorkloadProfile& profile, Allocation allocation,
                     LayerRange layers) {
  StageCost c;
  for (std::size_t i = 0; i < allocation.devices.size(); ++i) {
    const auto d = allocation.devices[i];
    const auto y = allocation.samples[i];
    c.fp_ms = std::max(c.fp_ms, exec_time(profile, d, layers, Phase::kForward, y));
    c.bp_ms = std::max(c.bp_ms, exec_time(profile, d, layers, Phase::kBackward, y));
  }
  c.allocation = std::move(allocation);
  return c;
}

StageCost allocate_microbatch(const WorkloadProfile& profile,
                              std::span<const std::size_t> group,
                              const AllocationRequest& req) {
  Allocation phase1 = memory_aware_balancing(profile, group, req, req.micro_batch_size);
  return stage_cost(profile, straggler_offloading(profile, phase1, req), req.layers);
}

}  // namespace edgepipe
