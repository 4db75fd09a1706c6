// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/plan_io.h"

#include "edgepipe/errors.h"
#include "edgepipe/profile.h"
#include "json.hpp"

namespace edgepipe {

using json = nlohmann::ordered_json;

std::string serialize_plan(const PlanConfig& plan) {
  json doc;
  doc["format_version"] = kPlanFormatVersion;
  doc["model_name"] = plan.model_name;
  doc["micro_batches"] = plan.micro_batches;
  doc["micro_batch_size"] = plan.micro_batch_size;
  doc["k_policy"] = std::string(to_string(plan.k_policy));
  doc["optimizer"] = std::string(to_string(plan.optimizer));
  doc["block_size"] = plan.block_size;
  json stages = json::array();
  for (const auto& s : plan.stages) {
    stages.push_back({{"index", s.index},
                      {"layers", {s.layers.first, s.layers.last}},
                      {"devices", s.devices},
                      {"allocation", s.allocation},
                      {"k", s.k},
                      {"fp_ms", s.fp_ms},
                      {"bp_ms", s.bp_ms},
                      {"allreduce_ms", s.allreduce_ms},
                      {"param_bytes", s.param_bytes},
                      {"activation_bytes_per_sample", s.activation_bytes_per_sample}});
  }
  doc["stages"] = std::move(stages);
  json steps = json::array();
  for (const auto& st : plan.timeline.steps) {
    steps.push_back({{"kind", st.kind == StepKind::kExecution ? "execution" : "communication"},
                     {"stage", st.stage},
                     {"fp_ms", st.fp_ms},
                     {"bp_ms", st.bp_ms}});
  }
  doc["timeline"] = {{"steps", std::move(steps)}, {"dominant", plan.timeline.dominant}};
  doc["estimated_round_latency_ms"] = plan.estimated_round_latency_ms;
  return doc.dump(2) + "\n";
}

PlanConfig parse_plan(const std::string& text) {
  PlanConfig plan;
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != kPlanFormatVersion) {
      throw ParseError("unsupported plan format_version " + std::to_string(version));
    }
    plan.model_name = doc.value("model_name", std::string());
    plan.micro_batches = doc.at("micro_batches").get<std::size_t>();
    plan.micro_batch_size = doc.at("micro_batch_size").get<std::size_t>();
    plan.k_policy = parse_k_policy(doc.at("k_policy").get<std::string>());
    plan.optimizer = parse_optimizer(doc.at("optimizer").get<std::string>());
    plan.block_size = doc.at("block_size").get<std::size_t>();
    for (const auto& sj : doc.at("stages")) {
      StageSpec s;
      s.index = sj.at("index").get<std::size_t>();
      const auto& layers = sj.at("layers");
      if (layers.size() != 2) throw ParseError("stage layers must be [first, last]");
      s.layers = {layers[0].get<std::size_t>(), layers[1].get<std::size_t>()};
      s.devices = sj.at("devices").get<std::vector<std::size_t>>();
      s.allocation = sj.at("allocation").get<std::vector<std::size_t>>();
      s.k = sj.at("k").get<std::size_t>();
      s.fp_ms = sj.at("fp_ms").get<double>();
      s.bp_ms = sj.at("bp_ms").get<double>();
      s.allreduce_ms = sj.at("allreduce_ms").get<double>();
      s.param_bytes = sj.at("param_bytes").get<Bytes>();
      s.activation_bytes_per_sample = sj.at("activation_bytes_per_sample").get<Bytes>();
      plan.stages.push_back(std::move(s));
    }
    const auto& tj = doc.at("timeline");
    plan.timeline.micro_batches = plan.micro_batches;
    plan.timeline.micro_batch_size = plan.micro_batch_size;
    for (const auto& st : tj.at("steps")) {
      const auto kind = st.at("kind").get<std::string>();
      if (kind != "execution" && kind != "communication") {
        throw ParseError("unknown step kind '" + kind + "'");
      }
      plan.timeline.steps.push_back(
          {kind == "execution" ? StepKind::kExecution : StepKind::kCommunication,
           st.at("stage").get<std::size_t>(), st.at("fp_ms").get<double>(),
           st.at("bp_ms").get<double>()});
    }
    plan.timeline.dominant = tj.at("dominant").get<std::size_t>();
    plan.estimated_round_latency_ms = doc.at("estimated_round_latency_ms").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed plan: ") + e.what());
  }
  std::size_t num_layers = plan.stages.empty() ? 0 : plan.stages.back().layers.last + 1;
  check_plan_structure(plan, num_layers);
  if (plan.timeline.steps.empty()) {
    throw ValidationError("timeline_alternation", "plan file has no timeline");
  }
  return plan;
}

PlanConfig load_plan(const std::filesystem::path& path) {
  return parse_plan(read_text_file(path));
}

void save_plan(const PlanConfig& plan, const std::filesystem::path& path) {
  write_text_file(path, serialize_plan(plan));
}

}  // namespace edgepipe
