// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

#include "edgepipe/allocator.h"
#include "edgepipe/errors.h"

namespace edgepipe {

std::vector<std::size_t> order_devices(const WorkloadProfile& profile) {
  std::vector<std::size_t> order(profile.num_devices());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Bytes ma = profile.devices[a].memory_budget_bytes;
    const Bytes mb = profile.devices[b].memory_budget_bytes;
    if (ma != mb) return ma > mb;
    return profile.devices[a].device_id < profile.devices[b].device_id;
  });
  return order;
}

std::vector<std::size_t> order_devices(const WorkloadProfile& profile,
                                       std::span<const std::size_t> excluded) {
  auto order = order_devices(profile);
  std::erase_if(order, [&](std::size_t d) {
    return std::find(excluded.begin(), excluded.end(), d) != excluded.end();
  });
  return order;
}

PipelineSummary prepend_stage(const PipelineSummary& sub, const Step& exec,
                              const Step& comm, Millis exec_allreduce_ms,
                              std::size_t micro_batches) {
  const double m = static_cast<double>(micro_batches);
  PipelineSummary out;
  if (sub.num_steps == 0) {
    out.num_steps = 1;
    out.dominant = 0;
    out.aligned = m * exec.total();
    out.slack = exec_allreduce_ms;
    return out;
  }
  out.num_steps = sub.num_steps + 2;
  const Millis extended = exec.total() + comm.total() + sub.aligned;
  const Millis head = m * exec.total();
  const Millis link = exec.total() + m * comm.total();
  out.dominant = sub.dominant + 2;
  out.aligned = extended;
  if (head > out.aligned) {
    out.dominant = 0;
    out.aligned = head;
  }
  if (link > out.aligned) {
    out.dominant = 1;
    out.aligned = link;
  }
  // The communication step has no AllReduce and is dominated by the new
  // execution step's term.
  out.slack = std::max(exec_allreduce_ms, sub.slack - exec.bp_ms - comm.bp_ms);
  return out;
}

std::size_t update_dominant(const PipelineSummary& sub, const Step& exec,
                            const Step& comm, std::size_t micro_batches) {
  return prepend_stage(sub, exec, comm, 0.0, micro_batches).dominant;
}

std::size_t update_dominant(const StepTimeline& sub, const Step& exec,
                            const Step& comm) {
  PipelineSummary s;
  if (!sub.steps.empty()) {
    s.num_steps = sub.steps.size();
    s.dominant = sub.dominant;
    s.aligned = aligned_step_total(sub, sub.dominant);
  }
  return update_dominant(s, exec, comm, sub.micro_batches);
}

namespace {

struct CostEntry {
  std::optional<StageCost> cost;  // none: infeasible
  Millis allreduce_ms = 0.0;
};

struct Node {
  PipelineSummary summary;
  std::size_t used = 0;
  LayerRange layers;
  std::size_t run_begin = 0;
  std::size_t run_end = 0;
  std::size_t k = 1;
  const CostEntry* cost = nullptr;
  long parent = -1;
};

class Planner {
 public:
  Planner(const WorkloadProfile& profile, const PlannerOptions& options)
      : profile_(profile), opt_(options), order_(order_devices(profile, options.excluded_devices)) {}

  PlanConfig run() {
    const std::size_t L = profile_.num_layers();
    const std::size_t N = order_.size();
    if (N == 0) throw NoFeasiblePlan("no usable devices");
    const std::size_t max_p = std::min(L, N);
    n1_ = N + 1;
    p1_ = max_p + 1;
    cells_.assign((L + 1) * n1_ * n1_ * p1_, {});

    for (std::size_t p = 1; p <= max_p; ++p) {
      const std::size_t k = kp_for_policy(opt_.k_policy, p, 0);
      for (std::size_t l_new = p; l_new <= L; ++l_new) {
        if (p == 1) {
          const LayerRange layers{L - l_new, L - 1};
          for_each_run(0, N, [&](std::size_t s, std::size_t e) {
            const CostEntry& c = cost(layers, s, e, k);
            if (!c.cost) return;
            Node n;
            n.summary = prepend_stage({}, exec_step(c), {}, c.allreduce_ms, opt_.micro_batches);
            n.used = e - s;
            n.layers = layers;
            n.run_begin = s;
            n.run_end = e;
            n.k = k;
            n.cost = &c;
            insert(cell(l_new, s, e, 1), std::move(n));
          });
          continue;
        }
        for (std::size_t l = p - 1; l < l_new; ++l) {
          const LayerRange layers{L - l_new, L - l - 1};
          for_each_run(0, N, [&](std::size_t s2, std::size_t e2) {
            for (std::size_t s = e2; s < N; ++s) {
              for (std::size_t e = s + 1; e <= N; ++e) {
                const auto& front = cells_[cell(l, s, e, p - 1)];
                if (front.empty()) continue;
                const CostEntry& c = cost(layers, s2, e2, k);
                if (!c.cost) return;
                const Millis t = boundary_transfer_time(
                    profile_, layers.last, opt_.micro_batch_size, run(s2, e2), run(s, e));
                const Step comm{StepKind::kCommunication, 0, t, t};
                for (long parent : front) {
                  Node n;
                  n.summary = prepend_stage(nodes_[parent].summary, exec_step(c), comm,
                                            c.allreduce_ms, opt_.micro_batches);
                  n.used = nodes_[parent].used + (e2 - s2);
                  n.layers = layers;
                  n.run_begin = s2;
                  n.run_end = e2;
                  n.k = k;
                  n.cost = &c;
                  n.parent = parent;
                  insert(cell(l_new, s2, e2, p), std::move(n));
                }
              }
            }
          });
        }
      }
    }

    long best = -1;
    std::size_t best_p = 0;
    for (std::size_t p = 1; p <= max_p; ++p) {
      for_each_run(0, N, [&](std::size_t s, std::size_t e) {
        for (long id : cells_[cell(L, s, e, p)]) {
          if (best < 0 || better_final(nodes_[id], p, nodes_[best], best_p)) {
            best = id;
            best_p = p;
          }
        }
      });
    }
    if (best < 0) {
      throw NoFeasiblePlan("no partition of " + std::to_string(L) + " layers over " +
                           std::to_string(N) + " devices fits in memory with B=" +
                           std::to_string(opt_.micro_batch_size));
    }
    return materialize(best);
  }

 private:
  std::size_t cell(std::size_t l, std::size_t s, std::size_t e, std::size_t p) const {
    return ((l * n1_ + s) * n1_ + e) * p1_ + p;
  }

  std::span<const std::size_t> run(std::size_t s, std::size_t e) const {
    return std::span<const std::size_t>(order_).subspan(s, e - s);
  }

  template <typename F>
  static void for_each_run(std::size_t lo, std::size_t hi, F&& f) {
    for (std::size_t s = lo; s < hi; ++s) {
      for (std::size_t e = s + 1; e <= hi; ++e) f(s, e);
    }
  }

  static Step exec_step(const CostEntry& c) {
    return {StepKind::kExecution, 0, c.cost->fp_ms, c.cost->bp_ms};
  }

  const CostEntry& cost(LayerRange layers, std::size_t s, std::size_t e, std::size_t k) {
    const auto key = std::make_tuple(layers.first, layers.last, s, e, k);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    CostEntry entry;
    const auto group = run(s, e);
    AllocationRequest req{layers, opt_.micro_batch_size, k, opt_.optimizer, opt_.block_size};
    try {
      entry.cost = allocate_microbatch(profile_, group, req);
      entry.allreduce_ms = allreduce_time(profile_, group, layers);
    } catch (const InfeasibleAllocation&) {
      entry.cost.reset();
    }
    return memo_.emplace(key, std::move(entry)).first->second;
  }

  void insert(std::size_t cell_id, Node n) {
    auto& front = cells_[cell_id];
    const auto dominates = [](const Node& a, const Node& b) {
      return a.summary.aligned <= b.summary.aligned && a.summary.slack <= b.summary.slack &&
             a.used <= b.used;
    };
    if (!opt_.pareto) {
      if (!front.empty()) {
        const Node& cur = nodes_[front[0]];
        const Millis a = cur.summary.latency();
        const Millis b = n.summary.latency();
        if (b > a || (b == a && n.used >= cur.used)) return;
        front.clear();
      }
    } else {
      for (long id : front) {
        if (dominates(nodes_[id], n)) return;
      }
      std::erase_if(front, [&](long id) { return dominates(n, nodes_[id]); });
    }
    nodes_.push_back(std::move(n));
    front.push_back(static_cast<long>(nodes_.size() - 1));
  }

  static bool better_final(const Node& a, std::size_t pa, const Node& b, std::size_t pb) {
    const Millis la = a.summary.latency();
    const Millis lb = b.summary.latency();
    if (la != lb) return la < lb;
    if (pa != pb) return pa < pb;
    return a.used < b.used;
  }

  PlanConfig materialize(long head) const {
    PlanConfig plan;
    plan.model_name = profile_.model_name;
    plan.micro_batches = opt_.micro_batches;
    plan.micro_batch_size = opt_.micro_batch_size;
    plan.k_policy = opt_.k_policy;
    plan.optimizer = opt_.optimizer;
    plan.block_size = opt_.block_size;
    for (long id = head; id >= 0; id = nodes_[id].parent) {
      const Node& n = nodes_[id];
      StageSpec s;
      s.index = plan.stages.size();
      s.layers = n.layers;
      s.devices = n.cost->cost->allocation.devices;
      s.allocation = n.cost->cost->allocation.samples;
      s.k = n.k;
      plan.stages.push_back(std::move(s));
    }
    plan = estimate_plan(profile_, std::move(plan));
    const Millis dp = nodes_[head].summary.latency();
    if (std::abs(plan.estimated_round_latency_ms - dp) > kLatencyToleranceMs) {
      throw InternalError("planner latency " + std::to_string(dp) +
                          " disagrees with the re-estimated plan " +
                          std::to_string(plan.estimated_round_latency_ms));
    }
    return plan;
  }

  const WorkloadProfile& profile_;
  const PlannerOptions& opt_;
  std::vector<std::size_t> order_;
  std::size_t n1_ = 0;
  std::size_t p1_ = 0;
  std::vector<std::vector<long>> cells_;
  std::vector<Node> nodes_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t>, CostEntry>
      memo_;
};

void check_options(const WorkloadProfile& profile, const PlannerOptions& o) {
  if (o.micro_batches == 0 || o.micro_batch_size == 0) {
    throw ValidationError("plan_batches", "M and B must be at least 1");
  }
  if (o.block_size == 0) throw ValidationError("block_size", "block size must be at least 1");
  if (o.micro_batch_size > profile.max_batch()) {
    throw OutOfRange("B=" + std::to_string(o.micro_batch_size) +
                     " exceeds the profiled batch grid maximum " +
                     std::to_string(profile.max_batch()));
  }
}

}  // namespace

PlanConfig plan(const WorkloadProfile& profile, const PlannerOptions& options) {
  check_options(profile, options);
  return Planner(profile, options).run();
}

PlanConfig estimate_plan(const WorkloadProfile& profile, PlanConfig plan) {
  plan.timeline = {};
  check_plan_structure(plan, profile.num_layers());
  const std::size_t P = plan.stages.size();
  for (auto& s : plan.stages) {
    for (std::size_t i = 0; i < s.devices.size(); ++i) {
      const std::size_t d = s.devices[i];
      if (d >= profile.num_devices()) {
        throw ValidationError("plan_groups", "unknown device " + std::to_string(d), d);
      }
      const auto mem = stage_memory(profile, s.layers, s.allocation[i], s.k, plan.optimizer);
      if (mem.total_bytes > profile.devices[d].memory_budget_bytes) {
        throw InfeasibleAllocation("stage " + std::to_string(s.index) + " needs " +
                                   std::to_string(mem.total_bytes) + " bytes on device " +
                                   std::to_string(d) + " (budget " +
                                   std::to_string(profile.devices[d].memory_budget_bytes) + ")");
      }
    }
    const StageCost c = stage_cost(profile, Allocation{s.devices, s.allocation}, s.layers);
    s.fp_ms = c.fp_ms;
    s.bp_ms = c.bp_ms;
    s.allreduce_ms = allreduce_time(profile, s.devices, s.layers);
    s.param_bytes = param_bytes(profile, s.layers);
    s.activation_bytes_per_sample = activation_bytes(profile, s.layers);
  }

  StepTimeline& t = plan.timeline;
  t.micro_batches = plan.micro_batches;
  t.micro_batch_size = plan.micro_batch_size;
  std::vector<Millis> allreduce;
  for (std::size_t p = 0; p < P; ++p) {
    const auto& s = plan.stages[p];
    t.steps.push_back({StepKind::kExecution, p, s.fp_ms, s.bp_ms});
    allreduce.push_back(s.allreduce_ms);
    if (p + 1 < P) {
      const Millis c = boundary_transfer_time(profile, s.layers.last, plan.micro_batch_size,
                                              s.devices, plan.stages[p + 1].devices);
      t.steps.push_back({StepKind::kCommunication, p, c, c});
      allreduce.push_back(0.0);
    }
  }
  PipelineSummary summary;
  for (std::size_t p = P; p-- > 0;) {
    const Step& exec = t.steps[2 * p];
    const Step comm = p + 1 < P ? t.steps[2 * p + 1] : Step{};
    summary = prepend_stage(summary, exec, comm, plan.stages[p].allreduce_ms, plan.micro_batches);
  }
  t.dominant = summary.dominant;
  plan.estimated_round_latency_ms = round_latency(t, allreduce).latency_ms;
  return plan;
}

PlanConfig build_plan(const WorkloadProfile& profile, const PlannerOptions& options,
                      std::span<const std::pair<LayerRange, std::vector<std::size_t>>> stages) {
  check_options(profile, options);
  PlanConfig plan;
  plan.model_name = profile.model_name;
  plan.micro_batches = options.micro_batches;
  plan.micro_batch_size = options.micro_batch_size;
  plan.k_policy = options.k_policy;
  plan.optimizer = options.optimizer;
  plan.block_size = options.block_size;
  const std::size_t P = stages.size();
  for (std::size_t p = 0; p < P; ++p) {
    StageSpec s;
    s.index = p;
    s.layers = stages[p].first;
    s.k = kp_for_policy(options.k_policy, P, p);
    AllocationRequest req{s.layers, options.micro_batch_size, s.k, options.optimizer,
                          options.block_size};
    const StageCost c = allocate_microbatch(profile, stages[p].second, req);
    s.devices = c.allocation.devices;
    s.allocation = c.allocation.samples;
    plan.stages.push_back(std::move(s));
  }
  return estimate_plan(profile, std::move(plan));
}

std::vector<LayerRange> proportional_partition(const WorkloadProfile& profile,
                                               std::span<const double> shares) {
  const std::size_t L = profile.num_layers();
  const std::size_t P = shares.size();
  if (P == 0 || P > L) {
    throw ValidationError("partition", "cannot split " + std::to_string(L) + " layers into " +
                                           std::to_string(P) + " stages");
  }
  std::vector<long double> prefix(L + 1, 0.0L);
  for (std::size_t l = 0; l < L; ++l) prefix[l + 1] = prefix[l] + profile.layers[l].flops;
  const long double total_share = std::accumulate(shares.begin(), shares.end(), 0.0L);

  std::vector<LayerRange> ranges;
  std::size_t begin = 0;
  long double cum_share = 0.0L;
  for (std::size_t k = 1; k < P; ++k) {
    cum_share += shares[k - 1];
    const long double target = prefix[L] * cum_share / total_share;
    std::size_t best = begin + 1;
    for (std::size_t b = begin + 1; b <= L - (P - k); ++b) {
      if (std::fabs(prefix[b] - target) < std::fabs(prefix[best] - target)) best = b;
    }
    ranges.push_back({begin, best - 1});
    begin = best;
  }
  ranges.push_back({begin, L - 1});
  return ranges;
}

PlanConfig pure_dp_plan(const WorkloadProfile& profile, const PlannerOptions& options) {
  const std::pair<LayerRange, std::vector<std::size_t>> stage{
      LayerRange{0, profile.num_layers() - 1}, order_devices(profile)};
  return build_plan(profile, options, std::span(&stage, 1));
}

PlanConfig pure_pp_plan(const WorkloadProfile& profile, const PlannerOptions& options) {
  const auto order = order_devices(profile);
  const std::size_t P = std::min(profile.num_layers(), order.size());
  const std::vector<double> shares(P, 1.0);
  const auto ranges = proportional_partition(profile, shares);
  std::vector<std::pair<LayerRange, std::vector<std::size_t>>> stages;
  for (std::size_t p = 0; p < P; ++p) stages.push_back({ranges[p], {order[p]}});
  return build_plan(profile, options, stages);
}

std::vector<HdpGroup> hdp_layout(const WorkloadProfile& profile,
                                 std::size_t num_groups, std::size_t samples) {
  const std::size_t N = profile.num_devices();
  const std::size_t G = std::clamp<std::size_t>(num_groups, 1, N);
  std::vector<HdpGroup> groups;
  std::size_t handed = 0;
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t size = N / G + (g < N % G ? 1 : 0);
    const std::size_t P = std::min(profile.num_layers(), size);
    const std::vector<double> shares(P, 1.0);
    HdpGroup group;
    const auto ranges = proportional_partition(profile, shares);
    for (std::size_t p = 0; p + 1 < P; ++p) group.cut_after.push_back(ranges[p].last);
    group.batch = samples * size / N;
    handed += group.batch;
    groups.push_back(std::move(group));
  }
  for (std::size_t g = 0; handed < samples; g = (g + 1) % G, ++handed) ++groups[g].batch;
  return groups;
}

}  // namespace edgepipe
