// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "support/builders.h"

#include <string>
#include <utility>

#include "edgepipe/planner.h"

namespace edgepipe::testing {

WorkloadProfile linear_profile(std::size_t num_layers, const std::vector<LinearDevice>& devices,
                               std::vector<std::size_t> grid, double bits_per_second) {
  WorkloadProfile p;
  p.model_name = "linear";
  p.batch_sizes = std::move(grid);
  for (std::size_t l = 0; l < num_layers; ++l) {
    p.layers.push_back({l, kMB, kMB, 1'000'000'000});
  }
  for (std::size_t d = 0; d < devices.size(); ++d) {
    DeviceProfile dev;
    dev.device_id = d;
    dev.name = "d" + std::to_string(d);
    dev.memory_budget_bytes = devices[d].budget;
    for (std::size_t l = 0; l < num_layers; ++l) {
      std::vector<double> fp;
      std::vector<double> bp;
      for (auto b : p.batch_sizes) {
        fp.push_back(devices[d].fp_ms_per_sample * static_cast<double>(b));
        bp.push_back(devices[d].bp_ms_per_sample * static_cast<double>(b));
      }
      dev.fp_time_ms.push_back(std::move(fp));
      dev.bp_time_ms.push_back(std::move(bp));
    }
    p.devices.push_back(std::move(dev));
  }
  std::vector<std::vector<double>> bw(devices.size(),
                                      std::vector<double>(devices.size(), bits_per_second));
  for (std::size_t d = 0; d < devices.size(); ++d) bw[d][d] = 0.0;
  p.bandwidth = BandwidthMatrix(std::move(bw));
  return p;
}

PlanConfig timed_plan(std::size_t micro_batches, const std::vector<double>& fp_ms,
                      const std::vector<double>& bp_ms, const std::vector<double>& comm_ms,
                      const std::vector<std::size_t>& k) {
  PlanConfig plan;
  plan.model_name = "timed";
  plan.micro_batches = micro_batches;
  plan.timeline.micro_batches = micro_batches;
  const std::size_t P = fp_ms.size();
  for (std::size_t p = 0; p < P; ++p) {
    StageSpec s;
    s.index = p;
    s.layers = {p, p};
    s.devices = {p};
    s.allocation = {1};
    s.k = k[p];
    s.fp_ms = fp_ms[p];
    s.bp_ms = bp_ms[p];
    plan.stages.push_back(s);
    plan.timeline.steps.push_back({StepKind::kExecution, p, fp_ms[p], bp_ms[p]});
    if (p + 1 < P) {
      plan.timeline.steps.push_back({StepKind::kCommunication, p, comm_ms[p], comm_ms[p]});
    }
  }
  return plan;
}

WorkloadProfile fig7_profile() { return linear_profile(8, {{}, {}, {}, {}}); }

PlanConfig fig7_plan(const WorkloadProfile& profile) {
  PlannerOptions o;
  o.micro_batches = 4;
  o.micro_batch_size = 4;
  const std::vector<std::pair<LayerRange, std::vector<std::size_t>>> stages = {
      {{0, 2}, {0}}, {{3, 5}, {1, 2}}, {{6, 7}, {3}}};
  return build_plan(profile, o, stages);
}

}  // namespace edgepipe::testing
