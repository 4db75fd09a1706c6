// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/cost_model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edgepipe/errors.h"

namespace edgepipe {

std::size_t kp_default(std::size_t num_stages, std::size_t stage) {
  return 2 * (num_stages - stage) - 1;
}

std::size_t kp_for_policy(KPolicy policy, std::size_t num_stages,
                          std::size_t stage) {
  const std::size_t ahead = num_stages - stage;
  switch (policy) {
    case KPolicy::kPaper:
      return 2 * ahead - 1;
    case KPolicy::kA:
      return 2 * ahead;
    case KPolicy::kB:
      return ahead;
    case KPolicy::kC:
      return 2 * ahead + 1;
  }
  return 2 * ahead - 1;
}

std::size_t optimizer_state_multiplier(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::kSgdMomentum:
      return 1;  // momentum buffer
    case Optimizer::kAdam:
      return 2;  // first and second moments
  }
  return 1;
}

MemoryBreakdown stage_memory(const WorkloadProfile& profile, LayerRange layers,
                             std::size_t samples, std::size_t k,
                             Optimizer optimizer) {
  const Bytes w = param_bytes(profile, layers);
  MemoryBreakdown m;
  m.model_bytes = 2 * w;
  m.optimizer_bytes = optimizer_state_multiplier(optimizer) * w;
  m.activation_bytes_per_microbatch = samples * activation_bytes(profile, layers);
  m.k = k;
  m.total_bytes = m.model_bytes + m.optimizer_bytes + k * m.activation_bytes_per_microbatch;
  return m;
}

double min_bandwidth_between(const WorkloadProfile& profile,
                             std::span<const std::size_t> a,
                             std::span<const std::size_t> b) {
  double best = std::numeric_limits<double>::infinity();
  for (auto x : a) {
    for (auto y : b) {
      if (x == y) continue;
      best = std::min(best, profile.bandwidth.bits_per_second(x, y));
    }
  }
  return best;
}

Millis allreduce_time(const WorkloadProfile& profile,
                      std::span<const std::size_t> group, LayerRange layers) {
  const std::size_t n = group.size();
  if (n <= 1) return 0.0;
  const double bw = min_bandwidth_between(profile, group, group);
  const double per_device_bytes = 2.0 * static_cast<double>(n - 1) *
                                  static_cast<double>(param_bytes(profile, layers)) /
                                  static_cast<double>(n);
  return transfer_ms(per_device_bytes, bw);
}

Millis boundary_transfer_time(const WorkloadProfile& profile,
                              std::size_t boundary_layer,
                              std::size_t micro_batch_size,
                              std::span<const std::size_t> upstream,
                              std::span<const std::size_t> downstream) {
  const double bw = min_bandwidth_between(profile, upstream, downstream);
  if (!std::isfinite(bw)) return 0.0;  // same device on both sides
  const double bytes = static_cast<double>(profile.layers[boundary_layer].activation_bytes) *
                       static_cast<double>(micro_batch_size);
  return transfer_ms(bytes, bw);
}

Millis waiting_time(const StepTimeline& timeline, std::size_t step) {
  Millis t = 0.0;
  for (std::size_t i = 0; i < step; ++i) t += timeline.steps[i].fp_ms;
  return t;
}

Millis exec_phase_time(const StepTimeline& timeline, std::size_t step) {
  const std::size_t dm = timeline.dominant;
  const auto& steps = timeline.steps;
  Millis t = static_cast<double>(timeline.micro_batches) * steps[dm].total();
  if (step < dm) {
    for (std::size_t i = step; i < dm; ++i) t += steps[i].total();
  } else {
    for (std::size_t i = dm; i < step; ++i) t -= steps[i].total();
  }
  return t;
}

Millis aligned_step_total(const StepTimeline& timeline, std::size_t step) {
  Millis t = static_cast<double>(timeline.micro_batches) * timeline.steps[step].total();
  for (std::size_t i = 0; i < step; ++i) t += timeline.steps[i].total();
  return t;
}

RoundLatency round_latency(const StepTimeline& timeline,
                           std::span<const Millis> allreduce_ms) {
  if (allreduce_ms.size() != timeline.size()) {
    throw InternalError("AllReduce times must align with the timeline steps");
  }
  RoundLatency best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t s = 0; s < timeline.size(); ++s) {
    const Millis v = waiting_time(timeline, s) + exec_phase_time(timeline, s) + allreduce_ms[s];
    if (v > best.latency_ms) best = {v, s};
  }
  return best;
}

Bytes comm_volume_hpp(const PlanConfig& plan, const WorkloadProfile& profile) {
  const Bytes beta = plan.micro_batches * plan.micro_batch_size;
  Bytes volume = 0;
  for (const auto& s : plan.stages) {
    volume += 2 * (s.devices.size() - 1) * param_bytes(profile, s.layers);
  }
  for (std::size_t j = 0; j + 1 < plan.stages.size(); ++j) {
    volume += 2 * beta * profile.layers[plan.stages[j].layers.last].activation_bytes;
  }
  return volume;
}

Bytes comm_volume_hdp(std::span<const HdpGroup> groups,
                      const WorkloadProfile& profile) {
  Bytes volume = 0;
  if (groups.size() > 1) {
    const Bytes model = param_bytes(profile, {0, profile.num_layers() - 1});
    volume += 2 * groups.size() * model;
  }
  for (const auto& g : groups) {
    for (auto l : g.cut_after) {
      volume += 2 * g.batch * profile.layers.at(l).activation_bytes;
    }
  }
  return volume;
}

}  // namespace edgepipe
