// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Seeded generators for randomized property sweeps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "edgepipe/plan.h"
#include "edgepipe/profile.h"

namespace edgepipe::testing {

struct InstanceShape {
  std::size_t max_layers = 6;
  std::size_t max_devices = 4;
  std::vector<std::size_t> batch_grid = {1, 2, 4, 8};
};

// A valid profile with 1..max_layers layers and 1..max_devices devices.
// Times are nonlinear in batch size, memory budgets range from tight to
// ample and bandwidths span 50 Mbps to 1 Gbps.
WorkloadProfile random_profile(std::mt19937_64& rng, const InstanceShape& shape = {});

// Random timeline of `stages` stages with arbitrary step times (multiples
// of 1/8 ms) and dominant index left at 0.
StepTimeline random_timeline(std::mt19937_64& rng, std::size_t stages,
                             std::size_t micro_batches);

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi);  // inclusive

}  // namespace edgepipe::testing
