// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "edgepipe/simulator.h"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <limits>
#include <queue>
#include <tuple>

#include "edgepipe/cost_model.h"
#include "edgepipe/errors.h"

namespace edgepipe {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kForward:
      return "fp";
    case EventKind::kBackward:
      return "bp";
    case EventKind::kForwardComm:
      return "fwd_comm";
    case EventKind::kBackwardComm:
      return "bwd_comm";
    case EventKind::kAllReduce:
      return "allreduce";
  }
  return "?";
}

namespace {

constexpr double kNotYet = -1.0;

struct Completion {
  Millis end = 0.0;
  std::size_t seq = 0;
  std::size_t step = 0;
  std::size_t resource = 0;
  std::size_t micro_batch = 0;
  bool backward = false;

  bool operator>(const Completion& o) const {
    return std::tie(end, seq) > std::tie(o.end, o.seq);
  }
};

class Simulation {
 public:
  Simulation(const PlanConfig& plan, const SimOptions& options)
      : plan_(plan),
        steps_(plan.timeline.steps),
        S_(steps_.size()),
        M_(plan.micro_batches),
        full_duplex_(options.full_duplex) {
    if (S_ != 2 * plan.stages.size() - 1 || plan.stages.empty()) {
      throw ValidationError("timeline_alternation",
                            "plan has no timeline matching its stages; estimate it first");
    }
    fp_end_.assign(S_, std::vector<double>(M_, kNotYet));
    bp_end_.assign(S_, std::vector<double>(M_, kNotYet));
    fp_started_.assign(S_, std::vector<bool>(M_, false));
    bp_started_.assign(S_, std::vector<bool>(M_, false));
    busy_.assign(S_, {false, false});
    bp_done_.assign(S_, 0);
    in_flight_.assign(plan.stages.size(), 0);
    peak_.assign(plan.stages.size(), 0);
  }

  SimResult run() {
    dispatch(0.0);
    while (!pending_.empty()) {
      const Millis t = pending_.top().end;
      while (!pending_.empty() && pending_.top().end == t) {
        complete(pending_.top());
        pending_.pop();
      }
      dispatch(t);
    }
    return finish();
  }

 private:
  bool is_exec(std::size_t s) const { return steps_[s].kind == StepKind::kExecution; }
  std::size_t resources(std::size_t s) const { return !is_exec(s) && full_duplex_ ? 2 : 1; }

  // Ready time of the forward (backward) pass of m on step s, or kNotYet.
  double fp_ready(std::size_t s, std::size_t m) const {
    return s == 0 ? 0.0 : fp_end_[s - 1][m];
  }
  double bp_ready(std::size_t s, std::size_t m) const {
    return s + 1 == S_ ? fp_end_[s][m] : bp_end_[s + 1][m];
  }

  void dispatch(Millis t) {
    for (std::size_t s = 0; s < S_; ++s) {
      for (std::size_t r = 0; r < resources(s); ++r) {
        if (busy_[s][r]) continue;
        const bool only_fp = resources(s) == 2 && r == 0;
        const bool only_bp = resources(s) == 2 && r == 1;
        // (ready time, backward first, micro-batch)
        std::tuple<double, int, std::size_t> best{std::numeric_limits<double>::infinity(), 2, 0};
        bool found = false;
        const bool admit_fp = !is_exec(s) || in_flight_[s / 2] < plan_.stages[s / 2].k;
        for (std::size_t m = 0; m < M_; ++m) {
          if (!only_fp && !bp_started_[s][m]) {
            const double ready = bp_ready(s, m);
            if (ready != kNotYet && ready <= t) {
              const auto key = std::make_tuple(ready, 0, m);
              if (!found || key < best) best = key, found = true;
            }
          }
          if (!only_bp && admit_fp && !fp_started_[s][m]) {
            const double ready = fp_ready(s, m);
            if (ready != kNotYet && ready <= t) {
              const auto key = std::make_tuple(ready, 1, m);
              if (!found || key < best) best = key, found = true;
            }
          }
        }
        if (found) start(s, r, std::get<2>(best), std::get<1>(best) == 0, t);
      }
    }
  }

  void start(std::size_t s, std::size_t r, std::size_t m, bool backward, Millis t) {
    const Millis d = backward ? steps_[s].bp_ms : steps_[s].fp_ms;
    busy_[s][r] = true;
    if (backward) {
      bp_started_[s][m] = true;
    } else {
      fp_started_[s][m] = true;
      if (is_exec(s)) {
        const std::size_t p = s / 2;
        peak_[p] = std::max(peak_[p], ++in_flight_[p]);
      }
    }
    EventKind kind;
    if (is_exec(s)) {
      kind = backward ? EventKind::kBackward : EventKind::kForward;
    } else {
      kind = backward ? EventKind::kBackwardComm : EventKind::kForwardComm;
    }
    events_.push_back({s, static_cast<long>(m), kind, t, t + d});
    pending_.push({t + d, seq_++, s, r, m, backward});
  }

  void complete(const Completion& c) {
    busy_[c.step][c.resource] = false;
    if (!c.backward) {
      fp_end_[c.step][c.micro_batch] = c.end;
      return;
    }
    bp_end_[c.step][c.micro_batch] = c.end;
    if (!is_exec(c.step)) return;
    const std::size_t p = c.step / 2;
    --in_flight_[p];
    if (++bp_done_[c.step] == M_) {
      const Millis ta = plan_.stages[p].allreduce_ms;
      if (ta > 0.0) {
        events_.push_back({c.step, -1, EventKind::kAllReduce, c.end, c.end + ta});
      }
    }
  }

  SimResult finish() {
    SimResult r;
    r.events = std::move(events_);
    std::stable_sort(r.events.begin(), r.events.end(),
                     [](const SimEvent& a, const SimEvent& b) { return a.start_ms < b.start_ms; });
    for (const auto& e : r.events) r.round_latency_ms = std::max(r.round_latency_ms, e.end_ms);
    for (std::size_t s = 0; s < S_; ++s) {
      r.bubble_ms.push_back(bubble_count(r, s));
      Millis busy = 0.0;
      for (const auto& e : r.events) {
        if (e.step == s) busy += e.end_ms - e.start_ms;
      }
      r.idle_ms.push_back(r.round_latency_ms - busy);
    }
    const Bytes c = optimizer_state_multiplier(plan_.optimizer);
    for (std::size_t p = 0; p < plan_.stages.size(); ++p) {
      const auto& st = plan_.stages[p];
      const std::size_t y = st.allocation.empty()
                                ? 0
                                : *std::max_element(st.allocation.begin(), st.allocation.end());
      const Bytes act = peak_[p] * y * st.activation_bytes_per_sample;
      r.peak_resident_microbatches.push_back(peak_[p]);
      r.peak_activation_bytes.push_back(act);
      r.peak_memory_bytes.push_back((2 + c) * st.param_bytes + act);
    }
    return r;
  }

  const PlanConfig& plan_;
  const std::vector<Step>& steps_;
  std::size_t S_;
  std::size_t M_;
  bool full_duplex_;
  std::vector<std::vector<double>> fp_end_, bp_end_;
  std::vector<std::vector<bool>> fp_started_, bp_started_;
  std::vector<std::array<bool, 2>> busy_;
  std::vector<std::size_t> bp_done_;
  std::vector<std::size_t> in_flight_, peak_;
  std::vector<SimEvent> events_;
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> pending_;
  std::size_t seq_ = 0;
};

}  // namespace

SimResult simulate_round(const PlanConfig& plan, const SimOptions& options) {
  if (plan.micro_batches == 0) throw ValidationError("plan_batches", "M must be at least 1");
  return Simulation(plan, options).run();
}

SimResult simulate_round(const PlanConfig& plan, std::size_t micro_batches,
                         const SimOptions& options) {
  if (micro_batches != plan.micro_batches) {
    throw ValidationError("micro_batches", "M=" + std::to_string(micro_batches) +
                                               " differs from the plan's M=" +
                                               std::to_string(plan.micro_batches));
  }
  return simulate_round(plan, options);
}

Millis bubble_count(const SimResult& result, std::size_t step) {
  Millis first = std::numeric_limits<double>::infinity();
  Millis last = -std::numeric_limits<double>::infinity();
  Millis busy = 0.0;
  for (const auto& e : result.events) {
    if (e.step != step || e.kind == EventKind::kAllReduce) continue;
    first = std::min(first, e.start_ms);
    last = std::max(last, e.end_ms);
    busy += e.end_ms - e.start_ms;
  }
  if (last < first) return 0.0;
  return (last - first) - busy;
}

EstimateReport validate_estimate(const PlanConfig& plan, const SimResult& result) {
  EstimateReport r;
  r.estimated_ms = plan.estimated_round_latency_ms;
  r.simulated_ms = result.round_latency_ms;
  r.gap_ms = r.simulated_ms - r.estimated_ms;
  r.relative_gap = r.simulated_ms > 0.0 ? r.gap_ms / r.simulated_ms : 0.0;
  r.bubble_ms = result.bubble_ms;
  if (r.estimated_ms > r.simulated_ms + kLatencyToleranceMs) {
    throw EstimateExceedsSimulation(fmt::format(
        "estimated round latency {} ms exceeds simulated {} ms", r.estimated_ms, r.simulated_ms));
  }
  return r;
}

std::string events_csv(const SimResult& result) {
  std::string out = "step,micro_batch,kind,start_ms,end_ms\n";
  for (const auto& e : result.events) {
    out += fmt::format("{},{},{},{},{}\n", e.step, e.micro_batch, to_string(e.kind), e.start_ms,
                       e.end_ms);
  }
  return out;
}

}  // namespace edgepipe
