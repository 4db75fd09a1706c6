// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/profile.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edgepipe/errors.h"
#include "json.hpp"

namespace edgepipe {

ValidationError::ValidationError(std::string invariant, std::string message,
                                 std::optional<std::size_t> device,
                                 std::optional<std::size_t> layer)
    : Error(message),
      invariant_(std::move(invariant)),
      device_(device),
      layer_(layer) {}

namespace {

using json = nlohmann::ordered_json;

void check_table(const WorkloadProfile& p, std::size_t d, const char* what,
                 const std::vector<std::vector<double>>& table,
                 std::vector<Violation>& out) {
  if (table.size() != p.num_layers()) {
    out.push_back({"shape",
                   std::string(what) + " table has " +
                       std::to_string(table.size()) + " layers, expected " +
                       std::to_string(p.num_layers()),
                   d, std::nullopt});
    return;
  }
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& row = table[l];
    if (row.size() != p.batch_sizes.size()) {
      out.push_back({"shape",
                     std::string(what) + " row does not match the batch grid",
                     d, l});
      continue;
    }
    for (std::size_t b = 0; b < row.size(); ++b) {
      if (!std::isfinite(row[b]) || row[b] < 0.0) {
        out.push_back({"nonnegative",
                       std::string(what) + " time must be finite and >= 0", d,
                       l});
        break;
      }
      if (b > 0 && row[b] < row[b - 1]) {
        out.push_back({"monotonicity",
                       std::string(what) +
                           " time decreases between batch sizes " +
                           std::to_string(p.batch_sizes[b - 1]) + " and " +
                           std::to_string(p.batch_sizes[b]),
                       d, l});
        break;
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate_profile(const WorkloadProfile& p) {
  std::vector<Violation> out;
  if (p.layers.empty()) out.push_back({"nonempty", "profile has no layers", {}, {}});
  if (p.devices.empty()) out.push_back({"nonempty", "profile has no devices", {}, {}});
  if (p.batch_sizes.empty()) {
    out.push_back({"batch_grid", "batch-size grid is empty", {}, {}});
  } else {
    if (p.batch_sizes.front() != 1) {
      out.push_back({"batch_grid", "batch-size grid must start at 1", {}, {}});
    }
    for (std::size_t i = 1; i < p.batch_sizes.size(); ++i) {
      if (p.batch_sizes[i] <= p.batch_sizes[i - 1]) {
        out.push_back({"batch_grid",
                       "batch-size grid must be strictly ascending", {}, {}});
        break;
      }
    }
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (p.layers[l].layer_id != l) {
      out.push_back({"layer_ids", "layer ids must run 0..L-1 in order", {}, l});
    }
  }
  for (std::size_t d = 0; d < p.devices.size(); ++d) {
    const auto& dev = p.devices[d];
    if (dev.device_id != d) {
      out.push_back({"device_ids", "device ids must run 0..N-1 in order", d, {}});
    }
    if (p.batch_sizes.empty()) continue;
    check_table(p, d, "fp", dev.fp_time_ms, out);
    check_table(p, d, "bp", dev.bp_time_ms, out);
  }
  const auto& bw = p.bandwidth.rows();
  if (bw.size() != p.devices.size()) {
    out.push_back({"bandwidth_shape",
                   "bandwidth matrix must be N x N", {}, {}});
    return out;
  }
  for (std::size_t i = 0; i < bw.size(); ++i) {
    if (bw[i].size() != bw.size()) {
      out.push_back({"bandwidth_shape", "bandwidth matrix must be N x N", i, {}});
      return out;
    }
  }
  for (std::size_t i = 0; i < bw.size(); ++i) {
    for (std::size_t j = 0; j < bw.size(); ++j) {
      if (i == j) continue;
      if (!(bw[i][j] > 0.0) || !std::isfinite(bw[i][j])) {
        out.push_back({"bandwidth_positive",
                       "bandwidth between " + std::to_string(i) + " and " +
                           std::to_string(j) + " must be positive",
                       i, {}});
      } else if (i < j && bw[i][j] != bw[j][i]) {
        out.push_back({"bandwidth_symmetry",
                       "bandwidth between " + std::to_string(i) + " and " +
                           std::to_string(j) + " is not symmetric",
                       i, {}});
      }
    }
  }
  return out;
}

namespace {

std::uint64_t read_unsigned(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    throw ValidationError("nonnegative",
                          std::string(key) + " must be nonnegative");
  }
  throw ParseError(std::string(key) + " must be an integer");
}

std::vector<std::vector<double>> read_table(const json& j, const char* key) {
  std::vector<std::vector<double>> table;
  for (const auto& row : j.at(key)) {
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) throw ParseError(std::string(key) + " entries must be numbers");
      r.push_back(x.get<double>());
    }
    table.push_back(std::move(r));
  }
  return table;
}

}  // namespace

WorkloadProfile parse_profile_unvalidated(const std::string& text) {
  WorkloadProfile p;
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != kProfileFormatVersion) {
      throw ParseError("unsupported profile format_version " +
                       std::to_string(version));
    }
    p.model_name = doc.value("model_name", std::string());
    for (const auto& b : doc.at("batch_sizes")) {
      if (!b.is_number_unsigned()) throw ParseError("batch sizes must be positive integers");
      p.batch_sizes.push_back(b.get<std::size_t>());
    }
    for (const auto& lj : doc.at("layers")) {
      LayerProfile l;
      l.layer_id = static_cast<std::size_t>(read_unsigned(lj, "id"));
      l.activation_bytes = read_unsigned(lj, "activation_bytes");
      l.param_bytes = read_unsigned(lj, "param_bytes");
      l.flops = read_unsigned(lj, "flops");
      p.layers.push_back(l);
    }
    for (const auto& dj : doc.at("devices")) {
      DeviceProfile d;
      d.device_id = static_cast<std::size_t>(read_unsigned(dj, "id"));
      d.name = dj.value("name", std::string());
      d.memory_budget_bytes = read_unsigned(dj, "memory_budget_bytes");
      d.fp_time_ms = read_table(dj, "fp_time_ms");
      d.bp_time_ms = read_table(dj, "bp_time_ms");
      p.devices.push_back(std::move(d));
    }
    p.bandwidth = BandwidthMatrix(read_table(doc, "bandwidth_bps"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed profile: ") + e.what());
  }
  return p;
}

WorkloadProfile parse_profile(const std::string& text) {
  WorkloadProfile p = parse_profile_unvalidated(text);
  auto violations = validate_profile(p);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ValidationError(v.invariant, v.message, v.device, v.layer);
  }
  return p;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

WorkloadProfile load_profile(const std::filesystem::path& path) {
  return parse_profile(read_text_file(path));
}

std::string serialize_profile(const WorkloadProfile& p) {
  json doc;
  doc["format_version"] = kProfileFormatVersion;
  doc["model_name"] = p.model_name;
  doc["batch_sizes"] = p.batch_sizes;
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"id", l.layer_id},
                      {"activation_bytes", l.activation_bytes},
                      {"param_bytes", l.param_bytes},
                      {"flops", l.flops}});
  }
  doc["layers"] = std::move(layers);
  json devices = json::array();
  for (const auto& d : p.devices) {
    devices.push_back({{"id", d.device_id},
                       {"name", d.name},
                       {"memory_budget_bytes", d.memory_budget_bytes},
                       {"fp_time_ms", d.fp_time_ms},
                       {"bp_time_ms", d.bp_time_ms}});
  }
  doc["devices"] = std::move(devices);
  doc["bandwidth_bps"] = p.bandwidth.rows();
  return doc.dump(2) + "\n";
}

void save_profile(const WorkloadProfile& profile,
                  const std::filesystem::path& path) {
  write_text_file(path, serialize_profile(profile));
}

namespace {

double layer_time(const WorkloadProfile& p, const std::vector<double>& row,
                  std::size_t batch) {
  if (batch == 0) return 0.0;
  const auto& grid = p.batch_sizes;
  auto it = std::lower_bound(grid.begin(), grid.end(), batch);
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  if (*it == batch) return row[hi];
  const std::size_t lo = hi - 1;
  const double frac = static_cast<double>(batch - grid[lo]) /
                      static_cast<double>(grid[hi] - grid[lo]);
  return row[lo] + (row[hi] - row[lo]) * frac;
}

}  // namespace

Millis exec_time(const WorkloadProfile& p, std::size_t device,
                 LayerRange range, Phase phase, std::size_t batch) {
  if (range.first > range.last || range.last >= p.num_layers()) {
    throw OutOfRange("layer range out of bounds");
  }
  if (batch > p.max_batch()) {
    throw OutOfRange("batch " + std::to_string(batch) +
                     " exceeds the profiled maximum " +
                     std::to_string(p.max_batch()));
  }
  const auto& table = phase == Phase::kForward ? p.devices.at(device).fp_time_ms
                                               : p.devices.at(device).bp_time_ms;
  // Each layer is snapped before summing so range sums are additive.
  Millis total = 0.0;
  for (std::size_t l = range.first; l <= range.last; ++l) {
    total += snap_ms(layer_time(p, table[l], batch));
  }
  return total;
}

double capacity(const WorkloadProfile& p, std::size_t device, LayerRange range,
                std::size_t batch) {
  const Millis t = exec_time(p, device, range, Phase::kForward, batch) +
                   exec_time(p, device, range, Phase::kBackward, batch);
  if (t <= 0.0) {
    throw DegenerateCapacity("device " + std::to_string(device) +
                             " has zero FP+BP time over layers " +
                             std::to_string(range.first) + ".." +
                             std::to_string(range.last));
  }
  return 1.0 / t;
}

Bytes param_bytes(const WorkloadProfile& p, LayerRange range) {
  Bytes total = 0;
  for (std::size_t l = range.first; l <= range.last; ++l) total += p.layers[l].param_bytes;
  return total;
}

Bytes activation_bytes(const WorkloadProfile& p, LayerRange range) {
  Bytes total = 0;
  for (std::size_t l = range.first; l <= range.last; ++l) {
    total += p.layers[l].activation_bytes;
  }
  return total;
}

std::uint64_t flops(const WorkloadProfile& p, LayerRange range) {
  std::uint64_t total = 0;
  for (std::size_t l = range.first; l <= range.last; ++l) total += p.layers[l].flops;
  return total;
}

}  // namespace edgepipe
