// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "support/oracles.h"

#include <algorithm>
#include <functional>

#include "edgepipe/cost_model.h"
#include "edgepipe/errors.h"

namespace edgepipe::testing {

std::optional<Millis> best_allocation_latency(const WorkloadProfile& profile,
                                              std::span<const std::size_t> group,
                                              const AllocationRequest& req) {
  std::vector<std::size_t> caps;
  for (auto d : group) {
    const auto c = max_samples_in_budget(profile, d, req);
    if (!c) return std::nullopt;
    caps.push_back(*c);
  }
  std::optional<Millis> best;
  std::vector<std::size_t> y(group.size(), 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == group.size()) {
      if (left > caps[i]) return;
      y[i] = left;
      Millis worst = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) {
        worst = std::max(worst, device_latency(profile, group[j], req.layers, y[j]));
      }
      if (!best || worst < *best) best = worst;
      return;
    }
    for (std::size_t v = 0; v <= std::min(left, caps[i]); ++v) {
      y[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, req.micro_batch_size);
  return best;
}

std::size_t argmax_aligned_step(const StepTimeline& timeline) {
  std::size_t best = 0;
  for (std::size_t s = 1; s < timeline.size(); ++s) {
    if (aligned_step_total(timeline, s) > aligned_step_total(timeline, best)) best = s;
  }
  return best;
}

namespace {

struct Search {
  const WorkloadProfile& profile;
  const PlannerOptions& options;
  std::vector<std::size_t> order;
  std::size_t P = 0;
  std::vector<std::size_t> sizes;  // layers per stage
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::optional<ExhaustiveResult> best;

  void score() {
    StepTimeline t;
    t.micro_batches = options.micro_batches;
    t.micro_batch_size = options.micro_batch_size;
    std::vector<Millis> allreduce;
    std::size_t first = 0;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<LayerRange> ranges;
    for (std::size_t p = 0; p < P; ++p) {
      ranges.push_back({first, first + sizes[p] - 1});
      first += sizes[p];
      groups.emplace_back(order.begin() + runs[p].first, order.begin() + runs[p].second);
    }
    for (std::size_t p = 0; p < P; ++p) {
      AllocationRequest req{ranges[p], options.micro_batch_size,
                            kp_for_policy(options.k_policy, P, p), options.optimizer,
                            options.block_size};
      StageCost c;
      try {
        c = allocate_microbatch(profile, groups[p], req);
      } catch (const InfeasibleAllocation&) {
        return;
      }
      t.steps.push_back({StepKind::kExecution, p, c.fp_ms, c.bp_ms});
      allreduce.push_back(allreduce_time(profile, groups[p], ranges[p]));
      if (p + 1 < P) {
        const Millis x = boundary_transfer_time(profile, ranges[p].last, options.micro_batch_size,
                                                groups[p], groups[p + 1]);
        t.steps.push_back({StepKind::kCommunication, p, x, x});
        allreduce.push_back(0.0);
      }
    }
    t.dominant = argmax_aligned_step(t);
    const Millis latency = round_latency(t, allreduce).latency_ms;
    if (!best) best = ExhaustiveResult{latency, 0};
    best->latency_ms = std::min(best->latency_ms, latency);
    ++best->plans_scored;
  }

  void choose_runs(std::size_t p, std::size_t from) {
    if (p == P) {
      score();
      return;
    }
    for (std::size_t s = from; s < order.size(); ++s) {
      for (std::size_t e = s + 1; e <= order.size(); ++e) {
        runs[p] = {s, e};
        choose_runs(p + 1, e);
      }
    }
  }

  void choose_sizes(std::size_t p, std::size_t left) {
    if (p + 1 == P) {
      sizes[p] = left;
      choose_runs(0, 0);
      return;
    }
    for (std::size_t n = 1; n + (P - p - 1) <= left; ++n) {
      sizes[p] = n;
      choose_sizes(p + 1, left - n);
    }
  }
};

}  // namespace

std::optional<ExhaustiveResult> exhaustive_plan(const WorkloadProfile& profile,
                                                const PlannerOptions& options) {
  Search s{profile, options, order_devices(profile)};
  for (std::size_t P = 1; P <= std::min(profile.num_layers(), profile.num_devices()); ++P) {
    s.P = P;
    s.sizes.assign(P, 0);
    s.runs.assign(P, {0, 0});
    s.choose_sizes(0, profile.num_layers());
  }
  return s.best;
}

}  // namespace edgepipe::testing
