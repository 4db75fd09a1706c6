// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/cli.h"

#include <fmt/format.h>

#include <optional>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "edgepipe/cost_model.h"
#include "edgepipe/errors.h"
#include "edgepipe/fault_tolerance.h"
#include "edgepipe/plan_io.h"
#include "edgepipe/planner.h"
#include "edgepipe/profile.h"
#include "edgepipe/simulator.h"
#include "json.hpp"

namespace edgepipe {

namespace {

using json = nlohmann::ordered_json;

constexpr int kReportFormatVersion = 1;

struct RunConfig {
  std::string profile_path;
  std::string plan_path;
  std::optional<std::size_t> micro_batches;
  std::optional<std::size_t> micro_batch_size;
  std::string k_policy = "paper";
  std::string optimizer = "sgd-momentum";
  std::size_t block_size = 1;
  std::uint64_t seed = 0;
  std::string format = "human";
  std::string out_path;
  std::string events_path;
  std::string new_plan_path;
  std::size_t device = 0;
  double fault_time_ms = 0.0;
  std::size_t hdp_groups = 2;
  bool full_duplex = false;
  LivenessConfig liveness;
};

bool machine(const RunConfig& c) { return c.format == "machine"; }

std::string ms(double v) { return fmt::format("{:.3f} ms", v); }

std::string mb(Bytes v) { return fmt::format("{:.3f} MB", static_cast<double>(v) / 1e6); }

// Report to --out when given, else to `out`.
void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty()) {
    out << text;
  } else {
    write_text_file(c.out_path, text);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

PlannerOptions planner_options(const RunConfig& c) {
  PlannerOptions o;
  o.micro_batches = c.micro_batches.value_or(1);
  o.micro_batch_size = c.micro_batch_size.value_or(1);
  o.k_policy = parse_k_policy(c.k_policy);
  o.optimizer = parse_optimizer(c.optimizer);
  o.block_size = c.block_size;
  return o;
}

// ---- validate-profile ----------------------------------------------------

int cmd_validate(const RunConfig& c, std::ostream& out) {
  const WorkloadProfile p = parse_profile_unvalidated(read_text_file(c.profile_path));
  const auto violations = validate_profile(p);
  json report;
  report["format_version"] = kReportFormatVersion;
  report["kind"] = "profile_validation";
  report["model_name"] = p.model_name;
  report["layers"] = p.num_layers();
  report["devices"] = p.num_devices();
  report["valid"] = violations.empty();
  json vs = json::array();
  for (const auto& v : violations) {
    json j{{"invariant", v.invariant}, {"message", v.message}};
    j["device"] = v.device ? json(*v.device) : json(nullptr);
    j["layer"] = v.layer ? json(*v.layer) : json(nullptr);
    vs.push_back(std::move(j));
  }
  report["violations"] = std::move(vs);

  if (machine(c)) {
    out << dump(report);
  } else if (violations.empty()) {
    out << fmt::format("profile '{}' is valid: {} layers, {} devices\n", p.model_name,
                       p.num_layers(), p.num_devices());
  } else {
    for (const auto& v : report["violations"]) {
      out << fmt::format("{}: {}\n", v["invariant"].get<std::string>(),
                         v["message"].get<std::string>());
    }
  }
  if (!violations.empty()) return kExitInvalid;
  if (!c.out_path.empty()) save_profile(p, c.out_path);
  return kExitOk;
}

// ---- plan ----------------------------------------------------------------

std::string human_plan(const json& doc) {
  std::string s = fmt::format("plan for '{}': M={} B={} k-policy={} optimizer={}\n",
                              doc["model_name"].get<std::string>(),
                              doc["micro_batches"].get<std::size_t>(),
                              doc["micro_batch_size"].get<std::size_t>(),
                              doc["k_policy"].get<std::string>(),
                              doc["optimizer"].get<std::string>());
  for (const auto& st : doc["stages"]) {
    std::string devs;
    const auto& d = st["devices"];
    const auto& y = st["allocation"];
    for (std::size_t i = 0; i < d.size(); ++i) {
      devs += fmt::format("{}{}:{}", i ? " " : "", d[i].get<std::size_t>(), y[i].get<std::size_t>());
    }
    s += fmt::format("  stage {}  layers {}-{}  devices [{}]  K={}  FP {}  BP {}  AllReduce {}\n",
                     st["index"].get<std::size_t>(), st["layers"][0].get<std::size_t>(),
                     st["layers"][1].get<std::size_t>(), devs, st["k"].get<std::size_t>(),
                     ms(st["fp_ms"].get<double>()), ms(st["bp_ms"].get<double>()),
                     ms(st["allreduce_ms"].get<double>()));
  }
  s += fmt::format("  dominant step {}\n  estimated round latency {}\n",
                   doc["timeline"]["dominant"].get<std::size_t>(),
                   ms(doc["estimated_round_latency_ms"].get<double>()));
  return s;
}

int cmd_plan(const RunConfig& c, std::ostream& out) {
  const WorkloadProfile profile = load_profile(c.profile_path);
  const PlanConfig p = plan(profile, planner_options(c));
  const std::string doc = serialize_plan(p);
  if (!c.out_path.empty()) write_text_file(c.out_path, doc);
  if (machine(c)) {
    if (c.out_path.empty()) out << doc;
  } else {
    out << human_plan(json::parse(doc));
  }
  return kExitOk;
}

// ---- simulate ------------------------------------------------------------

std::string_view kind_name(StepKind k) {
  return k == StepKind::kExecution ? "execution" : "communication";
}

json simulation_report(const PlanConfig& p, const SimResult& r, bool full_duplex) {
  json j;
  j["format_version"] = kReportFormatVersion;
  j["kind"] = "simulation";
  j["link_model"] = full_duplex ? "full-duplex" : "half-duplex";
  j["micro_batches"] = p.micro_batches;
  j["estimated_round_latency_ms"] = p.estimated_round_latency_ms;
  j["simulated_round_latency_ms"] = r.round_latency_ms;
  const double gap = r.round_latency_ms - p.estimated_round_latency_ms;
  j["gap_ms"] = gap;
  j["relative_gap"] = r.round_latency_ms > 0.0 ? gap / r.round_latency_ms : 0.0;
  j["estimate_within_simulation"] =
      p.estimated_round_latency_ms <= r.round_latency_ms + kLatencyToleranceMs;
  j["dominant_step"] = p.timeline.dominant;
  json steps = json::array();
  for (std::size_t s = 0; s < p.timeline.size(); ++s) {
    steps.push_back({{"step", s},
                     {"kind", std::string(kind_name(p.timeline.steps[s].kind))},
                     {"stage", p.timeline.steps[s].stage},
                     {"bubble_ms", r.bubble_ms[s]},
                     {"idle_ms", r.idle_ms[s]}});
  }
  j["steps"] = std::move(steps);
  json stages = json::array();
  for (std::size_t s = 0; s < p.stages.size(); ++s) {
    stages.push_back({{"stage", s},
                      {"k", p.stages[s].k},
                      {"peak_resident_microbatches", r.peak_resident_microbatches[s]},
                      {"peak_activation_bytes", r.peak_activation_bytes[s]},
                      {"peak_memory_bytes", r.peak_memory_bytes[s]}});
  }
  j["stages"] = std::move(stages);
  return j;
}

std::string human_simulation(const json& j) {
  std::string s = fmt::format("simulated one round ({} links), M={}\n",
                              j["link_model"].get<std::string>(),
                              j["micro_batches"].get<std::size_t>());
  s += fmt::format("  estimated {}  simulated {}  gap {} ({:.2f}%)\n",
                   ms(j["estimated_round_latency_ms"].get<double>()),
                   ms(j["simulated_round_latency_ms"].get<double>()),
                   ms(j["gap_ms"].get<double>()), 100.0 * j["relative_gap"].get<double>());
  for (const auto& st : j["steps"]) {
    const bool dom = st["step"] == j["dominant_step"];
    s += fmt::format("  step {} {:<13} bubble {:>14}  idle {:>14}{}\n",
                     st["step"].get<std::size_t>(), st["kind"].get<std::string>(),
                     ms(st["bubble_ms"].get<double>()), ms(st["idle_ms"].get<double>()),
                     dom ? "  (dominant)" : "");
  }
  for (const auto& st : j["stages"]) {
    s += fmt::format("  stage {} K={} peak resident {} peak memory {}\n",
                     st["stage"].get<std::size_t>(), st["k"].get<std::size_t>(),
                     st["peak_resident_microbatches"].get<std::size_t>(),
                     mb(st["peak_memory_bytes"].get<Bytes>()));
  }
  return s;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const PlanConfig p = load_plan(c.plan_path);
  SimOptions so;
  so.full_duplex = c.full_duplex;
  const SimResult r = c.micro_batches ? simulate_round(p, *c.micro_batches, so)
                                      : simulate_round(p, so);
  const json report = simulation_report(p, r, c.full_duplex);
  emit(c, out, machine(c) ? dump(report) : human_simulation(report));
  if (!c.events_path.empty()) write_text_file(c.events_path, events_csv(r));
  validate_estimate(p, r);  // throws; the report above is already written
  return kExitOk;
}

// ---- compare -------------------------------------------------------------

PlanConfig structural_plan(std::vector<std::pair<LayerRange, std::vector<std::size_t>>> stages,
                           const PlannerOptions& o) {
  PlanConfig p;
  p.micro_batches = o.micro_batches;
  p.micro_batch_size = o.micro_batch_size;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageSpec s;
    s.index = i;
    s.layers = stages[i].first;
    s.devices = std::move(stages[i].second);
    p.stages.push_back(std::move(s));
  }
  return p;
}

int cmd_compare(const RunConfig& c, std::ostream& out) {
  const WorkloadProfile profile = load_profile(c.profile_path);
  PlannerOptions o;
  PlanConfig hpp;
  if (!c.plan_path.empty()) {
    hpp = estimate_plan(profile, load_plan(c.plan_path));
    o = planner_options(c);
    o.micro_batches = hpp.micro_batches;
    o.micro_batch_size = hpp.micro_batch_size;
    o.k_policy = hpp.k_policy;
    o.optimizer = hpp.optimizer;
    o.block_size = hpp.block_size;
  } else {
    o = planner_options(c);
    hpp = plan(profile, o);
  }
  const std::size_t L = profile.num_layers();
  const auto order = order_devices(profile);
  const std::size_t samples = o.micro_batches * o.micro_batch_size;

  const PlanConfig dp_shape = structural_plan({{LayerRange{0, L - 1}, order}}, o);
  std::vector<std::pair<LayerRange, std::vector<std::size_t>>> pp_stages;
  {
    const std::size_t P = std::min(L, order.size());
    const auto ranges = proportional_partition(profile, std::vector<double>(P, 1.0));
    for (std::size_t i = 0; i < P; ++i) pp_stages.push_back({ranges[i], {order[i]}});
  }
  const PlanConfig pp_shape = structural_plan(pp_stages, o);
  const auto hdp = hdp_layout(profile, c.hdp_groups, samples);

  json j;
  j["format_version"] = kReportFormatVersion;
  j["kind"] = "comparison";
  j["model_name"] = profile.model_name;
  j["micro_batches"] = o.micro_batches;
  j["micro_batch_size"] = o.micro_batch_size;
  j["hdp_groups"] = hdp.size();
  const Bytes v_hdp = comm_volume_hdp(hdp, profile);
  const Bytes v_hpp = comm_volume_hpp(hpp, profile);
  j["volume_bytes"] = {{"hdp", v_hdp},
                       {"hpp", v_hpp},
                       {"pure_dp", comm_volume_hpp(dp_shape, profile)},
                       {"pure_pp", comm_volume_hpp(pp_shape, profile)}};
  j["hdp_exceeds_hpp"] = v_hdp > v_hpp;

  json latency;
  json infeasible = json::object();
  latency["hpp"] = hpp.estimated_round_latency_ms;
  const auto baseline = [&](const char* name, auto build) {
    try {
      latency[name] = build().estimated_round_latency_ms;
    } catch (const InfeasibleAllocation& e) {
      latency[name] = nullptr;
      infeasible[name] = e.what();
    }
  };
  baseline("pure_dp", [&] { return pure_dp_plan(profile, o); });
  baseline("pure_pp", [&] { return pure_pp_plan(profile, o); });
  j["estimated_round_latency_ms"] = std::move(latency);
  j["infeasible"] = std::move(infeasible);

  if (machine(c)) {
    emit(c, out, dump(j));
    return kExitOk;
  }
  std::string s = fmt::format("communication volume per round ({} samples)\n", samples);
  for (const auto& [name, v] : j["volume_bytes"].items()) {
    s += fmt::format("  {:<8} {}\n", name, mb(v.get<Bytes>()));
  }
  s += fmt::format("  HDP {} HPP\n", v_hdp > v_hpp ? "exceeds" : "does not exceed");
  s += "estimated round latency\n";
  for (const auto& [name, v] : j["estimated_round_latency_ms"].items()) {
    s += fmt::format("  {:<8} {}\n", name, v.is_null() ? "infeasible" : ms(v.get<double>()));
  }
  emit(c, out, s);
  return kExitOk;
}

// ---- inject-fault --------------------------------------------------------

struct Detection {
  std::optional<Millis> at_ms;
  json changes = json::array();
};

// Steps the detector once per heartbeat interval. Every device beats on
// schedule except the failed one, which stops at the fault time.
Detection detect(std::size_t num_devices, std::size_t failed, Millis fault_ms,
                 const LivenessConfig& cfg) {
  Detection d;
  LivenessState state = make_liveness(num_devices, cfg, 0.0);
  const Millis horizon = fault_ms + 4.0 * (cfg.suspect_timeout_ms + cfg.probe_timeout_ms) +
                         4.0 * cfg.heartbeat_interval_ms;
  for (std::size_t k = 1;; ++k) {
    const Millis now = static_cast<double>(k) * cfg.heartbeat_interval_ms;
    if (now > horizon) break;
    std::vector<std::size_t> beats;
    for (std::size_t i = 0; i < num_devices; ++i) {
      if (i != failed || now < fault_ms) beats.push_back(i);
    }
    auto step = liveness_step(state, now, beats, {});
    for (const auto& ch : step.changes) {
      d.changes.push_back({{"at_ms", now},
                           {"device", ch.device},
                           {"from", std::string(to_string(ch.from))},
                           {"to", std::string(to_string(ch.to))}});
    }
    state = std::move(step.state);
    if (!step.detected_failures.empty()) {
      d.at_ms = now;
      break;
    }
  }
  return d;
}

int cmd_inject(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const WorkloadProfile profile = load_profile(c.profile_path);
  const PlanConfig before = estimate_plan(profile, load_plan(c.plan_path));
  if (c.device >= profile.num_devices()) {
    throw ValidationError("device", "unknown device " + std::to_string(c.device), c.device);
  }
  if (c.liveness.heartbeat_interval_ms <= 0.0) {
    throw ValidationError("liveness", "heartbeat interval must be positive");
  }
  const Detection det = detect(profile.num_devices(), c.device, c.fault_time_ms, c.liveness);
  const ReplayPlan r = replan_on_failure(before, profile, c.device);
  const auto backups = assign_backups(before, profile);

  json j;
  j["format_version"] = kReportFormatVersion;
  j["kind"] = "fault_injection";
  j["failed_device"] = c.device;
  j["fault_time_ms"] = c.fault_time_ms;
  j["liveness"] = {{"heartbeat_interval_ms", c.liveness.heartbeat_interval_ms},
                   {"suspect_timeout_ms", c.liveness.suspect_timeout_ms},
                   {"probe_timeout_ms", c.liveness.probe_timeout_ms}};
  j["detected_at_ms"] = det.at_ms ? json(*det.at_ms) : json(nullptr);
  j["status_changes"] = det.changes;
  j["failed_stage"] = r.failed_stage;
  j["stage_removed"] = r.stage_removed;
  json bj = json::array();
  for (std::size_t s = 0; s < backups.size(); ++s) {
    const bool intra = backups[s].kind == BackupKind::kIntraStage;
    bj.push_back({{"stage", s},
                  {"kind", intra ? "intra-stage" : "next-stage"},
                  {"device", backups[s].device ? json(*backups[s].device) : json(nullptr)}});
  }
  j["backups"] = std::move(bj);
  json rj = json::array();
  for (const auto& op : r.restores) {
    rj.push_back({{"layer", op.layer},
                  {"source_device", op.source_device},
                  {"to_stage", op.to_stage},
                  {"bytes", op.bytes}});
  }
  j["restores"] = std::move(rj);
  j["restore_bytes"] = r.restore_bytes;
  json mj = json::array();
  for (const auto& op : r.migration.ops) {
    mj.push_back({{"layer", op.layer},
                  {"from_stage", op.from_stage},
                  {"to_stage", op.to_stage},
                  {"bytes", op.bytes}});
  }
  j["migrations"] = std::move(mj);
  j["migration_bytes"] = r.migration.total_bytes;
  j["heavy_rescheduling_bytes"] = heavy_rescheduling_bytes(before, profile, c.device);
  json parts = json::array();
  for (const auto& range : r.new_partition) parts.push_back({range.first, range.last});
  j["new_partition"] = std::move(parts);
  json groups = json::array();
  for (const auto& s : r.new_plan.stages) groups.push_back(s.devices);
  j["new_groups"] = std::move(groups);
  j["feasible"] = r.feasible;
  j["infeasible_stage"] = r.infeasible_stage ? json(*r.infeasible_stage) : json(nullptr);
  j["infeasible_reason"] = r.infeasible_reason;
  j["latency_before_ms"] = before.estimated_round_latency_ms;
  j["latency_after_ms"] = r.feasible ? json(r.new_plan.estimated_round_latency_ms) : json(nullptr);

  if (machine(c)) {
    emit(c, out, dump(j));
  } else {
    std::string s = fmt::format("device {} fails at {}; ", c.device, ms(c.fault_time_ms));
    s += det.at_ms ? fmt::format("detected at {}\n", ms(*det.at_ms)) : "not detected\n";
    s += fmt::format("  stage {} {}\n", r.failed_stage,
                     r.stage_removed ? "removed" : "keeps its other devices");
    for (const auto& op : r.restores) {
      s += fmt::format("  restore layer {} from device {} to stage {} ({})\n", op.layer,
                       op.source_device, op.to_stage, mb(op.bytes));
    }
    for (const auto& op : r.migration.ops) {
      s += fmt::format("  migrate layer {} stage {} -> {} ({})\n", op.layer, op.from_stage,
                       op.to_stage, mb(op.bytes));
    }
    s += fmt::format("  migrated {} vs {} for a full re-plan\n", mb(r.migration.total_bytes),
                     mb(j["heavy_rescheduling_bytes"].get<Bytes>()));
    s += fmt::format("  latency before {}  after {}\n", ms(before.estimated_round_latency_ms),
                     r.feasible ? ms(r.new_plan.estimated_round_latency_ms)
                                : std::string("infeasible"));
    emit(c, out, s);
  }
  if (!r.feasible) {
    err << "replayed plan does not fit: " << r.infeasible_reason << "\n";
    return kExitInvalid;
  }
  if (!c.new_plan_path.empty()) save_plan(r.new_plan, c.new_plan_path);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Plan, simulate and replay hybrid pipelines on heterogeneous devices",
               "edgepipe"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  const auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", c.format, "Report format")
        ->check(CLI::IsMember({"human", "machine"}));
    sub->add_option("--seed", c.seed, "Seed recorded in randomized runs");
  };
  const auto add_planning = [&](CLI::App* sub, bool required) {
    auto* m = sub->add_option("-M", c.micro_batches, "Micro-batches per round");
    auto* b = sub->add_option("-B", c.micro_batch_size, "Samples per micro-batch");
    if (required) {
      m->required();
      b->required();
    }
    sub->add_option("--k-policy", c.k_policy, "In-flight bound policy")
        ->check(CLI::IsMember({"paper", "a", "b", "c"}));
    sub->add_option("--optimizer", c.optimizer, "Optimizer state accounting")
        ->check(CLI::IsMember({"sgd-momentum", "adam"}));
    sub->add_option("--block-size", c.block_size, "Samples per offloading move")
        ->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate-profile", "Check a profile and list violations");
  validate->add_option("--profile", c.profile_path)->required();
  validate->add_option("--out", c.out_path, "Write the canonical profile here");
  add_format(validate);

  auto* plan_cmd = app.add_subcommand("plan", "Search for the lowest-latency plan");
  plan_cmd->add_option("--profile", c.profile_path)->required();
  plan_cmd->add_option("--out", c.out_path, "Plan file");
  add_planning(plan_cmd, true);
  add_format(plan_cmd);

  auto* sim = app.add_subcommand("simulate", "Replay one round of a plan event by event");
  sim->add_option("--plan", c.plan_path)->required();
  sim->add_option("-M", c.micro_batches, "Must match the plan");
  sim->add_option("--events", c.events_path, "CSV of every simulated event");
  sim->add_option("--out", c.out_path, "Report file");
  sim->add_flag("--full-duplex", c.full_duplex, "Let transfers run both ways at once");
  add_format(sim);

  auto* cmp = app.add_subcommand("compare", "Volumes and latencies against DP/PP/HDP layouts");
  cmp->add_option("--profile", c.profile_path)->required();
  cmp->add_option("--plan", c.plan_path, "Use this plan instead of planning");
  cmp->add_option("--out", c.out_path, "Report file");
  cmp->add_option("--hdp-groups", c.hdp_groups, "Groups in the HDP layout")
      ->check(CLI::PositiveNumber);
  add_planning(cmp, false);
  add_format(cmp);

  auto* inject = app.add_subcommand("inject-fault", "Fail one device and replay the pipeline");
  inject->add_option("--profile", c.profile_path)->required();
  inject->add_option("--plan", c.plan_path)->required();
  inject->add_option("--device", c.device, "Device that fails")->required();
  inject->add_option("--fault-time", c.fault_time_ms, "Failure time in ms")
      ->check(CLI::NonNegativeNumber);
  inject->add_option("--new-plan", c.new_plan_path, "Replayed plan file");
  inject->add_option("--out", c.out_path, "Report file");
  inject->add_option("--heartbeat-interval", c.liveness.heartbeat_interval_ms);
  inject->add_option("--suspect-timeout", c.liveness.suspect_timeout_ms);
  inject->add_option("--probe-timeout", c.liveness.probe_timeout_ms);
  add_format(inject);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  if (plan_cmd->parsed() && (*c.micro_batches == 0 || *c.micro_batch_size == 0)) {
    err << "error: -M and -B must be at least 1\n";
    return kExitInvalid;
  }
  if (cmp->parsed() && c.plan_path.empty() && (!c.micro_batches || !c.micro_batch_size)) {
    err << "error: compare needs --plan or both -M and -B\n";
    return kExitInvalid;
  }

  try {
    if (validate->parsed()) return cmd_validate(c, out);
    if (plan_cmd->parsed()) return cmd_plan(c, out);
    if (sim->parsed()) return cmd_simulate(c, out);
    if (cmp->parsed()) return cmd_compare(c, out);
    if (inject->parsed()) return cmd_inject(c, out, err);
  } catch (const ValidationError& e) {
    err << "error [" << e.invariant() << "]: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInvalid;
}

}  // namespace edgepipe
