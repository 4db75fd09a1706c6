// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "support/random_instance.h"

#include <algorithm>
#include <cmath>

namespace edgepipe::testing {

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

namespace {

double real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double millis3(double ms) { return std::round(ms * 1000.0) / 1000.0; }

}  // namespace

WorkloadProfile random_profile(std::mt19937_64& rng, const InstanceShape& shape) {
  constexpr double kMB = 1e6;
  WorkloadProfile p;
  p.model_name = "random";
  p.batch_sizes = shape.batch_grid;
  const std::size_t L = uniform(rng, 1, shape.max_layers);
  const std::size_t N = uniform(rng, 1, shape.max_devices);

  std::vector<double> base(L);
  Bytes total_w = 0;
  Bytes total_a = 0;
  for (std::size_t l = 0; l < L; ++l) {
    LayerProfile layer;
    layer.layer_id = l;
    layer.activation_bytes = static_cast<Bytes>(real(rng, 0.05, 4.0) * kMB);
    // One layer in three is parameter-heavy.
    layer.param_bytes = static_cast<Bytes>(
        (uniform(rng, 0, 2) == 0 ? real(rng, 10.0, 60.0) : real(rng, 0.0, 5.0)) * kMB);
    layer.flops = static_cast<std::uint64_t>(real(rng, 1e6, 1e9));
    base[l] = real(rng, 0.5, 20.0);
    total_w += layer.param_bytes;
    total_a += layer.activation_bytes;
    p.layers.push_back(layer);
  }

  const double footprint = 3.0 * total_w + 4.0 * shape.batch_grid.back() * total_a;
  for (std::size_t d = 0; d < N; ++d) {
    DeviceProfile dev;
    dev.device_id = d;
    dev.name = "dev" + std::to_string(d);
    dev.memory_budget_bytes = static_cast<Bytes>(footprint * real(rng, 0.15, 1.5));
    const double speed = real(rng, 0.5, 3.0);
    const double bp_ratio = real(rng, 1.2, 2.5);
    for (std::size_t l = 0; l < L; ++l) {
      const double alpha = real(rng, 0.5, 1.1);
      std::vector<double> fp;
      std::vector<double> bp;
      for (auto b : shape.batch_grid) {
        const double t = millis3(speed * base[l] * std::pow(static_cast<double>(b), alpha));
        fp.push_back(std::max(t, fp.empty() ? 0.0 : fp.back()));
        bp.push_back(std::max(millis3(t * bp_ratio), bp.empty() ? 0.0 : bp.back()));
      }
      dev.fp_time_ms.push_back(std::move(fp));
      dev.bp_time_ms.push_back(std::move(bp));
    }
    p.devices.push_back(std::move(dev));
  }
  std::vector<std::vector<double>> bw(N, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      bw[i][j] = bw[j][i] = std::round(real(rng, 50.0, 1000.0)) * 1e6;
    }
  }
  p.bandwidth = BandwidthMatrix(std::move(bw));
  return p;
}

StepTimeline random_timeline(std::mt19937_64& rng, std::size_t stages,
                             std::size_t micro_batches) {
  StepTimeline t;
  t.micro_batches = micro_batches;
  for (std::size_t p = 0; p < stages; ++p) {
    const double f = static_cast<double>(uniform(rng, 1, 80)) / 8.0;
    const double b = static_cast<double>(uniform(rng, 1, 160)) / 8.0;
    t.steps.push_back({StepKind::kExecution, p, f, b});
    if (p + 1 < stages) {
      const double c = static_cast<double>(uniform(rng, 0, 60)) / 8.0;
      t.steps.push_back({StepKind::kCommunication, p, c, c});
    }
  }
  return t;
}

}  // namespace edgepipe::testing
