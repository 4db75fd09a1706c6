// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Measured workload profile: per-layer tensor sizes and FLOPs, per-device
// FP/BP time tables sampled on a batch-size grid, memory budgets and the
// device-to-device bandwidth matrix. Everything the planner consumes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/units.h"

namespace edgepipe {

inline constexpr int kProfileFormatVersion = 1;

struct LayerProfile {
  std::size_t layer_id = 0;
  Bytes activation_bytes = 0;  // output activations of one sample
  Bytes param_bytes = 0;
  std::uint64_t flops = 0;     // per sample

  friend bool operator==(const LayerProfile&, const LayerProfile&) = default;
};

struct DeviceProfile {
  std::size_t device_id = 0;
  std::string name;
  Bytes memory_budget_bytes = 0;
  // [layer][batch index] in ms, aligned with WorkloadProfile::batch_sizes.
  std::vector<std::vector<double>> fp_time_ms;
  std::vector<std::vector<double>> bp_time_ms;

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

// Symmetric device-to-device bandwidth in bits per second. The diagonal is
// never read: intra-device transfers are free.
class BandwidthMatrix {
 public:
  BandwidthMatrix() = default;
  explicit BandwidthMatrix(std::vector<std::vector<double>> bps)
      : bps_(std::move(bps)) {}

  std::size_t size() const { return bps_.size(); }
  double bits_per_second(std::size_t from, std::size_t to) const {
    return bps_[from][to];
  }
  const std::vector<std::vector<double>>& rows() const { return bps_; }

  friend bool operator==(const BandwidthMatrix&,
                         const BandwidthMatrix&) = default;

 private:
  std::vector<std::vector<double>> bps_;
};

enum class Phase { kForward, kBackward };

struct LayerRange {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive

  std::size_t size() const { return last - first + 1; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct WorkloadProfile {
  std::string model_name;
  std::vector<std::size_t> batch_sizes;
  std::vector<LayerProfile> layers;
  std::vector<DeviceProfile> devices;
  BandwidthMatrix bandwidth;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t num_devices() const { return devices.size(); }
  std::size_t max_batch() const { return batch_sizes.back(); }

  friend bool operator==(const WorkloadProfile&,
                         const WorkloadProfile&) = default;
};

struct Violation {
  std::string invariant;
  std::string message;
  std::optional<std::size_t> device;
  std::optional<std::size_t> layer;
};

// Every violated invariant, in a stable order. Empty means valid.
std::vector<Violation> validate_profile(const WorkloadProfile& profile);

// Parses the JSON profile document. Throws ParseError on malformed input
// and ValidationError (first violation) on an invalid profile.
WorkloadProfile parse_profile(const std::string& text);
// Structure only; the caller runs validate_profile.
WorkloadProfile parse_profile_unvalidated(const std::string& text);
WorkloadProfile load_profile(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string serialize_profile(const WorkloadProfile& profile);
void save_profile(const WorkloadProfile& profile,
                  const std::filesystem::path& path);

// Sum over the range of the per-layer time at `batch`. Between grid points
// the per-layer time is interpolated linearly; batch 0 costs nothing.
// Throws OutOfRange when batch exceeds the profiled grid.
Millis exec_time(const WorkloadProfile& profile, std::size_t device,
                 LayerRange range, Phase phase, std::size_t batch);

// Inverse of the FP+BP time of the range at micro-batch size `batch`, in
// 1/ms. Throws DegenerateCapacity when that time is zero.
double capacity(const WorkloadProfile& profile, std::size_t device,
                LayerRange range, std::size_t batch);

Bytes param_bytes(const WorkloadProfile& profile, LayerRange range);
Bytes activation_bytes(const WorkloadProfile& profile, LayerRange range);
std::uint64_t flops(const WorkloadProfile& profile, LayerRange range);

}  // namespace edgepipe
