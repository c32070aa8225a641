#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace kgflow {

struct VmType {
  std::string name;
  int cpu_cores = 1;
  int gpu_cards = 0;
  double unit_price = 0.0;  // currency per hour

  // Cores left for CPU-only operators once every GPU card has taken one.
  [[nodiscard]] int cpu_headroom() const { return cpu_cores - gpu_cards; }
};

struct Catalog {
  std::string currency;
  std::vector<VmType> vm_types;
};

// {"currency": "...", "vm_types": [{"name", "cpu_cores", "gpu_cards", "unit_price"}]}
// A bare array of rows is accepted as well.
Catalog catalog_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Catalog& catalog);
Catalog load_catalog(const std::filesystem::path& path);

struct PriceFit {
  double theta1 = 0.0;  // per CPU core-hour
  double theta2 = 0.0;  // per GPU card-hour
  std::vector<double> relative_errors;  // percent, one per catalog row
};

enum class PriceFitWeighting {
  relative,  // minimise squared percentage error
  absolute,  // ordinary least squares
};

double vm_price(double cpu, double gpu, const PriceFit& fit);

// |θ1·cpu + θ2·gpu − quoted| / quoted, in percent.
std::vector<double> price_errors(const std::vector<VmType>& rows, double theta1, double theta2);

PriceFit fit_price_linear(const std::vector<VmType>& rows,
                          PriceFitWeighting weighting = PriceFitWeighting::relative);

// One measured or estimated (price, makespan) pair. An infeasible plan has an
// infinite makespan.
struct Observation {
  double unit_price = 0.0;
  double makespan = std::numeric_limits<double>::infinity();
};

// {"observations": [{"unit_price", "makespan" | null}]} or a bare array.
std::vector<Observation> observations_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const std::vector<Observation>& observations);

// Finite points only; one per price (the fastest). A point is dropped when a
// strictly cheaper point is strictly faster. Sorted by price.
std::vector<Observation> pareto_frontier(const std::vector<Observation>& observations);

// y = g(x) = a + b / (x − c)
struct MakespanPriceFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::vector<Observation> frontier;
  std::vector<double> residuals;  // g(x) − y per frontier point
  double sse = 0.0;
  bool c_pinned = false;

  [[nodiscard]] double operator()(double x) const { return a + b / (x - c); }
};

nlohmann::json to_json(const MakespanPriceFit& fit);
MakespanPriceFit makespan_fit_from_json(const nlohmann::json& doc);

// When the observations contain infeasible prices below the cheapest feasible
// one, c is pinned at the highest of them and (a, b) follow by linear least
// squares. Otherwise a damped least-squares fit is run from several starting
// values of c in (0, min price).
MakespanPriceFit fit_price_makespan(const std::vector<Observation>& observations);

// x₀ = sqrt((b/a)·η/(1−η)) + c
double optimal_unit_price(const MakespanPriceFit& fit, double eta);

struct Demand {
  int gpus = 0;
  int cpus = 0;
};

struct ProcurementPlan {
  std::vector<std::pair<VmType, int>> items;  // type, count > 0; catalog order

  [[nodiscard]] double unit_price() const;
  [[nodiscard]] int instances() const;
  [[nodiscard]] int gpus() const;
  [[nodiscard]] int cpu_headroom() const;
  [[nodiscard]] int largest_gpu() const;
  [[nodiscard]] bool satisfies(const Demand& demand) const;
  // One entry per instance, sorted by GPU count descending (stable on
  // catalog order).
  [[nodiscard]] std::vector<VmType> expand() const;
  [[nodiscard]] std::string describe() const;
};

// Every multiset with total price <= max_price and at most max_instances
// instances (empty multiset excluded), in a deterministic order.
std::vector<ProcurementPlan> enumerate_procurements(const Catalog& catalog, double max_price,
                                                    int max_instances);

// Cheapest price of any multiset satisfying the demand.
double cheapest_feasible_price(const Catalog& catalog, const Demand& demand);

// Feasible multisets within the search bound max(2·x₀, cheapest feasible),
// ranked by |price − x₀|, then fewest instances, then largest single GPU
// count, then catalog order.
std::vector<ProcurementPlan> procure_ranked(const Catalog& catalog, double x0, const Demand& demand);
ProcurementPlan procure(const Catalog& catalog, double x0, const Demand& demand);

// η·cost_com + (1−η)·cost_mon on raw values.
double objective(double cost_com, double cost_mon, double eta);

// Min-max normalises both costs over the candidate set, then weights them.
// A cost that is constant across the set contributes 0.
std::vector<double> normalized_objectives(const std::vector<std::pair<double, double>>& costs,
                                          double eta);

// seconds × price per hour / 3600
double monetary_cost(double seconds, double unit_price);

void check_eta(double eta);

} // namespace kgflow
