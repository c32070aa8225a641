#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgflow/cost_model.hpp"
#include "kgflow/flowline.hpp"

namespace kgflow {

struct Compound {
  std::vector<std::string> members;  // topological order, anchor first
  std::optional<std::string> anchor;
};

struct Compounding {
  std::vector<Compound> compounds;    // anchors in topological order
  std::vector<std::string> orphans;   // topological order
};

// Each GPU task absorbs CPU-only successors whose precursors all already
// belong to it, until nothing more joins.
Compounding compound(const Flowline& flowline);

// task id -> 1-based VM index
using Partition = std::map<std::string, int>;

// Places compounds, then orphans, on the VM sharing the most neighbours with
// the unit among VMs with room for it (lowest index on ties). `vms` is used
// in the given order; callers sort it by GPU count, descending.
Partition greedy_partition(const Flowline& flowline, const Compounding& units, const std::vector<VmType>& vms);

// Hill-climbs on per-slice makespan by moving or swapping whole units
// (compounds, orphans) between VMs while capacities allow. Never splits a
// compound; returns the input when nothing improves.
Partition refine_partition(const Flowline& flowline, const TaskProfile& profile, const Compounding& units,
                           const std::vector<VmType>& vms, Partition partition, const NetworkParams& net);

struct PlanPredictions {
  double makespan_s = 0.0;   // per data slice
  double cost_com_s = 0.0;   // whole corpus
  double cost_mon = 0.0;     // currency
  double J = 0.0;            // raw weighted sum
  double eta = 0.5;
};

struct SchedulePlan {
  std::vector<VmType> vms;  // vms[i] is VM index i + 1
  Partition assignment;
  PlanPredictions predictions;

  [[nodiscard]] double unit_price() const;
  // Counts per type name, in first-appearance order.
  [[nodiscard]] std::vector<std::pair<std::string, int>> procurement() const;
};

// Resource qualification per VM plus full, exact coverage of the tasks.
ValidationReport check_qualification(const SchedulePlan& plan, const Flowline& flowline);

struct ScheduleOptions {
  double eta = 0.5;
  NetworkParams net{};
  double corpus_rows = 200;
  double slice_rows = 200;
  std::optional<MakespanPriceFit> prior_fit;  // skips the warm-up fit
  bool refine = true;  // run refine_partition after the greedy placement
};

// Procurement demand: one GPU per model, one free core per operator.
Demand demand_of(const Flowline& flowline);

// Estimated (price, makespan) pairs for every procurement up to `max_price`
// and at most one VM per task. Unqualified combinations are infinite.
std::vector<Observation> synthesize_observations(const Flowline& flowline, const TaskProfile& profile,
                                                 const Catalog& catalog, const NetworkParams& net,
                                                 double max_price);

// Price point to procure at. Uses the prior fit when given; otherwise fits
// the curve on synthesized observations, falling back to the observed
// frontier point with the lowest η·y + (1−η)·x·y when no fit is possible.
double target_unit_price(const Flowline& flowline, const TaskProfile& profile, const Catalog& catalog,
                         const ScheduleOptions& options);

SchedulePlan schedule(const Flowline& flowline, const TaskProfile& profile, const Catalog& catalog,
                      const ScheduleOptions& options);

// Fills plan.predictions from the plan's VMs and assignment.
PlanPredictions evaluate_plan(const SchedulePlan& plan, const Flowline& flowline, const TaskProfile& profile,
                              double corpus_rows, double slice_rows, double eta, const NetworkParams& net);

// {"procurement": [{"type", "count"}], "vms": [{"index", "type", "cpu", "gpu", "price"}],
//  "assignment": {task: vm}, "predictions": {"makespan_s", "cost_com_s", "cost_mon", "J", "eta"}}
nlohmann::json to_json(const SchedulePlan& plan);
SchedulePlan plan_from_json(const nlohmann::json& doc);

} // namespace kgflow
