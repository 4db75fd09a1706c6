// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace edgepipe {

using Bytes = std::uint64_t;

// Durations are milliseconds held in a double, always snapped to a fixed
// binary grid of 2^-20 ms (just under 1 ns). On that grid every sum,
// difference and integer multiple the cost model performs is exact, so two
// evaluation orders of the same formula agree bit-for-bit.
using Millis = double;

inline constexpr double kTicksPerMs = 1048576.0;

inline Millis snap_ms(double ms) {
  return std::nearbyint(ms * kTicksPerMs) / kTicksPerMs;
}

// Time to move `bytes` over a link of `bits_per_second`, in ms. This is the
// only place where bytes are converted to bits.
inline Millis transfer_ms(double bytes, double bits_per_second) {
  return snap_ms(bytes * 8.0 / bits_per_second * 1000.0);
}

// Tolerance used wherever two latencies are compared: one nanosecond.
inline constexpr double kLatencyToleranceMs = 1e-6;

}  // namespace edgepipe
