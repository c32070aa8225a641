#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgflow/cost_model.hpp"
#include "kgflow/flowline.hpp"
#include "kgflow/scheduler.hpp"

namespace kgflow {

enum class SimDiscipline {
  serial,     // slice s enters the flowline once slice s−1 has left it
  pipelined,  // each task holds one slice at a time; slices overlap
};

struct SimConfig {
  NetworkParams net{};
  double slice_rows = 200;
  double corpus_rows = 200;
  double jitter = 0.0;  // std-dev of the multiplicative duration noise
  std::uint64_t seed = 0;
  SimDiscipline discipline = SimDiscipline::serial;
};

struct TaskRun {
  std::string task;
  std::size_t slice = 0;
  int vm = 0;
  double start = 0.0;
  double end = 0.0;
};

struct SimResult {
  double total_time = 0.0;
  std::vector<double> per_slice_makespan;
  double monetary_cost = 0.0;
  std::vector<TaskRun> timeline;  // in completion order
};

// Number of slices: ceil(corpus / slice).
std::size_t slice_count(double corpus_rows, double slice_rows);

SimResult simulate(const SchedulePlan& plan, const Flowline& flowline, const TaskProfile& profile,
                   const SimConfig& config);

nlohmann::json to_json(const SimResult& result);
// Complete ("X") events, one per task run; pid is the VM, tid the task.
nlohmann::json chrome_trace(const SimResult& result, const Flowline& flowline);

// Uniform choice among feasible procurements with no removable instance (up
// to 4× the cheapest feasible price), then a uniform capacity-respecting
// assignment. Compounds are ignored.
SchedulePlan baseline_random(const Flowline& flowline, const Catalog& catalog, std::uint64_t seed);

// Upward-rank list scheduling with earliest finish time on the cheapest
// feasible procurement.
SchedulePlan baseline_list(const Flowline& flowline, const TaskProfile& profile, const Catalog& catalog,
                           const NetworkParams& net);

struct SweepConfig {
  SimConfig sim{};
  int random_plans = 50;
  std::optional<MakespanPriceFit> prior_fit;
};

struct SweepRow {
  double eta = 0.0;
  std::string scheduler;  // heuristic, list, random (median over plans)
  double makespan_s = 0.0;
  double total_time_s = 0.0;
  double cost_mon = 0.0;
  double J = 0.0;  // normalised over every plan simulated for this η
};

std::vector<SweepRow> sweep_eta(const Flowline& flowline, const TaskProfile& profile, const Catalog& catalog,
                                const std::vector<double>& etas, const SweepConfig& config);

std::string to_csv(const std::vector<SweepRow>& rows);

} // namespace kgflow
