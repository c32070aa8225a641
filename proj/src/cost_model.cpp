#include "kgflow/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "kgflow/error.hpp"
#include "kgflow/json_io.hpp"

namespace kgflow {

namespace {

constexpr double kPriceEps = 1e-9;

VmType vm_from_json(const nlohmann::json& row) {
  VmType vm;
  vm.name = row.at("name").get<std::string>();
  vm.cpu_cores = row.at("cpu_cores").get<int>();
  vm.gpu_cards = row.value("gpu_cards", 0);
  vm.unit_price = row.at("unit_price").get<double>();
  if (vm.cpu_cores < 1) throw Error("vm type '" + vm.name + "': cpu_cores must be at least 1");
  if (vm.gpu_cards < 0) throw Error("vm type '" + vm.name + "': gpu_cards must be non-negative");
  if (vm.gpu_cards > vm.cpu_cores) throw Error("vm type '" + vm.name + "': more GPU cards than CPU cores");
  if (!(vm.unit_price > 0)) throw Error("vm type '" + vm.name + "': unit_price must be positive");
  return vm;
}

} // namespace

Catalog catalog_from_json(const nlohmann::json& doc) {
  Catalog c;
  const nlohmann::json& rows = doc.is_array() ? doc : doc.at("vm_types");
  if (doc.is_object()) c.currency = doc.value("currency", "");
  for (const auto& row : rows) c.vm_types.push_back(vm_from_json(row));
  return c;
}

nlohmann::json to_json(const Catalog& catalog) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& vm : catalog.vm_types) {
    rows.push_back({{"name", vm.name}, {"cpu_cores", vm.cpu_cores}, {"gpu_cards", vm.gpu_cards},
                    {"unit_price", vm.unit_price}});
  }
  return {{"currency", catalog.currency}, {"vm_types", rows}};
}

Catalog load_catalog(const std::filesystem::path& path) {
  try {
    return catalog_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": bad catalog: " + e.what());
  }
}

double vm_price(double cpu, double gpu, const PriceFit& fit) {
  return fit.theta1 * cpu + fit.theta2 * gpu;
}

std::vector<double> price_errors(const std::vector<VmType>& rows, double theta1, double theta2) {
  std::vector<double> out;
  for (const auto& vm : rows) {
    const double predicted = theta1 * vm.cpu_cores + theta2 * vm.gpu_cards;
    out.push_back(std::abs(predicted - vm.unit_price) / vm.unit_price * 100.0);
  }
  return out;
}

PriceFit fit_price_linear(const std::vector<VmType>& rows, PriceFitWeighting weighting) {
  if (rows.size() < 2) throw Error("price fit needs at least 2 catalog rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& vm = rows[static_cast<std::size_t>(i)];
    const double w = weighting == PriceFitWeighting::relative ? 1.0 / vm.unit_price : 1.0;
    X(i, 0) = w * vm.cpu_cores;
    X(i, 1) = w * vm.gpu_cards;
    y(i) = w * vm.unit_price;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw Error("price fit: (cpu, gpu) columns are linearly dependent");
  Eigen::Vector2d theta = qr.solve(y);
  // Keep the coefficients non-negative: refit the surviving one alone.
  if (theta(0) < 0 || theta(1) < 0) {
    const int keep = theta(0) < 0 ? 1 : 0;
    const double num = X.col(keep).dot(y);
    const double den = X.col(keep).squaredNorm();
    theta.setZero();
    theta(keep) = den > 0 ? std::max(0.0, num / den) : 0.0;
  }
  PriceFit fit{theta(0), theta(1), {}};
  fit.relative_errors = price_errors(rows, fit.theta1, fit.theta2);
  return fit;
}

std::vector<Observation> observations_from_json(const nlohmann::json& doc) {
  const nlohmann::json& rows = doc.is_array() ? doc : doc.at("observations");
  std::vector<Observation> out;
  for (const auto& row : rows) {
    Observation o;
    o.unit_price = row.at("unit_price").get<double>();
    const auto it = row.find("makespan");
    if (it != row.end() && !it->is_null()) o.makespan = it->get<double>();
    out.push_back(o);
  }
  return out;
}

nlohmann::json to_json(const std::vector<Observation>& observations) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : observations) {
    nlohmann::json row{{"unit_price", o.unit_price}};
    row["makespan"] = std::isfinite(o.makespan) ? nlohmann::json(o.makespan) : nlohmann::json(nullptr);
    rows.push_back(row);
  }
  return {{"observations", rows}};
}

std::vector<Observation> pareto_frontier(const std::vector<Observation>& observations) {
  std::map<double, double> best;  // price -> fastest makespan
  for (const auto& o : observations) {
    if (!std::isfinite(o.makespan)) continue;
    auto [it, inserted] = best.emplace(o.unit_price, o.makespan);
    if (!inserted) it->second = std::min(it->second, o.makespan);
  }
  std::vector<Observation> out;
  double fastest_cheaper = std::numeric_limits<double>::infinity();
  for (const auto& [price, makespan] : best) {
    if (!(fastest_cheaper < makespan)) out.push_back({price, makespan});
    fastest_cheaper = std::min(fastest_cheaper, makespan);
  }
  return out;
}

nlohmann::json to_json(const MakespanPriceFit& fit) {
  return {{"a", fit.a},
          {"b", fit.b},
          {"c", fit.c},
          {"c_pinned", fit.c_pinned},
          {"sse", fit.sse},
          {"residuals", fit.residuals},
          {"frontier", to_json(fit.frontier).at("observations")}};
}

MakespanPriceFit makespan_fit_from_json(const nlohmann::json& doc) {
  MakespanPriceFit fit;
  fit.a = doc.at("a").get<double>();
  fit.b = doc.at("b").get<double>();
  fit.c = doc.at("c").get<double>();
  if (!(fit.a > 0 && fit.b > 0 && fit.c > 0)) throw Error("makespan fit parameters must be positive");
  return fit;
}

namespace {

// Linear least squares for (a, b) with c held fixed.
std::pair<double, double> fit_ab(const std::vector<Observation>& pts, double c) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = 1.0 / (pts[static_cast<std::size_t>(i)].unit_price - c);
    y(i) = pts[static_cast<std::size_t>(i)].makespan;
  }
  const Eigen::Vector2d ab = X.colPivHouseholderQr().solve(y);
  return {ab(0), ab(1)};
}

struct CurveResidual : Eigen::DenseFunctor<double> {
  const std::vector<Observation>* pts;

  explicit CurveResidual(const std::vector<Observation>& p)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(p.size())), pts(&p) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const auto& p = (*pts)[i];
      f(static_cast<Eigen::Index>(i)) = x(0) + x(1) / (p.unit_price - x(2)) - p.makespan;
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double d = (*pts)[i].unit_price - x(2);
      j(r, 0) = 1.0;
      j(r, 1) = 1.0 / d;
      j(r, 2) = x(1) / (d * d);
    }
    return 0;
  }
};

void finish(MakespanPriceFit& fit) {
  fit.residuals.clear();
  fit.sse = 0.0;
  for (const auto& p : fit.frontier) {
    const double r = fit(p.unit_price) - p.makespan;
    fit.residuals.push_back(r);
    fit.sse += r * r;
  }
}

std::string describe(const MakespanPriceFit& fit) {
  std::ostringstream os;
  os << "a=" << fit.a << " b=" << fit.b << " c=" << fit.c << " sse=" << fit.sse;
  return os.str();
}

} // namespace

MakespanPriceFit fit_price_makespan(const std::vector<Observation>& observations) {
  MakespanPriceFit fit;
  fit.frontier = pareto_frontier(observations);
  if (fit.frontier.size() < 3) {
    throw Error("makespan fit needs at least 3 frontier points, got " + std::to_string(fit.frontier.size()));
  }
  const double min_price = fit.frontier.front().unit_price;

  double pin = -1.0;
  for (const auto& o : observations) {
    if (!std::isfinite(o.makespan) && o.unit_price < min_price) pin = std::max(pin, o.unit_price);
  }
  if (pin > 0) {
    fit.c = pin;
    fit.c_pinned = true;
    std::tie(fit.a, fit.b) = fit_ab(fit.frontier, fit.c);
    finish(fit);
  } else {
    bool have = false;
    MakespanPriceFit best;
    for (int k = 1; k <= 19; ++k) {
      const double c0 = min_price * (1.0 - k / 20.0);
      const auto [a0, b0] = fit_ab(fit.frontier, c0);
      Eigen::VectorXd x(3);
      x << a0, b0, c0;
      CurveResidual functor(fit.frontier);
      Eigen::LevenbergMarquardt<CurveResidual> lm(functor);
      lm.setMaxfev(2000);
      lm.setXtol(1e-14);
      lm.setFtol(1e-14);
      lm.minimize(x);
      MakespanPriceFit cand = fit;
      cand.a = x(0);
      cand.b = x(1);
      cand.c = x(2);
      if (!(cand.c > 0 && cand.c < min_price) || !std::isfinite(cand.a) || !std::isfinite(cand.b)) continue;
      finish(cand);
      if (!have || cand.sse < best.sse) {
        best = cand;
        have = true;
      }
    }
    if (!have) throw Error("makespan fit diverged: no start kept c inside (0, " + std::to_string(min_price) + ")");
    fit = best;
  }
  if (!(fit.a > 0 && fit.b > 0 && fit.c > 0)) throw Error("makespan fit diverged: " + describe(fit));
  return fit;
}

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) throw Error("eta out of range [0, 1): " + std::to_string(eta));
}

double optimal_unit_price(const MakespanPriceFit& fit, double eta) {
  check_eta(eta);
  if (!(fit.a > 0 && fit.b > 0)) throw Error("optimal price needs a, b > 0");
  return std::sqrt((fit.b / fit.a) * (eta / (1.0 - eta))) + fit.c;
}

double ProcurementPlan::unit_price() const {
  double p = 0;
  for (const auto& [vm, n] : items) p += vm.unit_price * n;
  return p;
}

int ProcurementPlan::instances() const {
  int k = 0;
  for (const auto& item : items) k += item.second;
  return k;
}

int ProcurementPlan::gpus() const {
  int g = 0;
  for (const auto& [vm, n] : items) g += vm.gpu_cards * n;
  return g;
}

int ProcurementPlan::cpu_headroom() const {
  int c = 0;
  for (const auto& [vm, n] : items) c += vm.cpu_headroom() * n;
  return c;
}

int ProcurementPlan::largest_gpu() const {
  int g = 0;
  for (const auto& item : items) g = std::max(g, item.first.gpu_cards);
  return g;
}

bool ProcurementPlan::satisfies(const Demand& demand) const {
  return gpus() >= demand.gpus && cpu_headroom() >= demand.cpus;
}

std::vector<VmType> ProcurementPlan::expand() const {
  std::vector<VmType> out;
  for (const auto& [vm, n] : items) out.insert(out.end(), static_cast<std::size_t>(n), vm);
  std::stable_sort(out.begin(), out.end(),
                   [](const VmType& x, const VmType& y) { return x.gpu_cards > y.gpu_cards; });
  return out;
}

std::string ProcurementPlan::describe() const {
  std::string s;
  for (const auto& [vm, n] : items) {
    if (!s.empty()) s += " + ";
    s += vm.name + " x" + std::to_string(n);
  }
  return s;
}

std::vector<ProcurementPlan> enumerate_procurements(const Catalog& catalog, double max_price,
                                                    int max_instances) {
  std::vector<ProcurementPlan> out;
  const auto& types = catalog.vm_types;
  std::vector<int> counts(types.size(), 0);
  std::function<void(std::size_t, double, int)> rec = [&](std::size_t i, double price, int used) {
    if (i == types.size()) {
      if (used == 0) return;
      ProcurementPlan p;
      for (std::size_t t = 0; t < types.size(); ++t) {
        if (counts[t] > 0) p.items.emplace_back(types[t], counts[t]);
      }
      out.push_back(std::move(p));
      return;
    }
    for (int n = 0; used + n <= max_instances && price + n * types[i].unit_price <= max_price + kPriceEps; ++n) {
      counts[i] = n;
      rec(i + 1, price + n * types[i].unit_price, used + n);
    }
    counts[i] = 0;
  };
  rec(0, 0.0, 0);
  return out;
}

double cheapest_feasible_price(const Catalog& catalog, const Demand& demand) {
  if (catalog.vm_types.empty()) throw Error("empty catalog");
  // Unbounded knapsack over (gpu, headroom) deficits; both capped at demand.
  const int G = std::max(demand.gpus, 0), C = std::max(demand.cpus, 0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>((G + 1) * (C + 1)), inf);
  auto at = [&](int g, int c) -> double& { return cost[static_cast<std::size_t>(g * (C + 1) + c)]; };
  at(0, 0) = 0.0;
  // cost(g, c): cheapest multiset covering at least g GPUs and c cores.
  for (int g = 0; g <= G; ++g) {
    for (int c = 0; c <= C; ++c) {
      if (g == 0 && c == 0) continue;
      for (const auto& vm : catalog.vm_types) {
        const int pg = std::max(0, g - vm.gpu_cards), pc = std::max(0, c - vm.cpu_headroom());
        if (pg == g && pc == c) continue;
        at(g, c) = std::min(at(g, c), at(pg, pc) + vm.unit_price);
      }
    }
  }
  if (G == 0 && C == 0) {
    double cheapest = inf;
    for (const auto& vm : catalog.vm_types) cheapest = std::min(cheapest, vm.unit_price);
    return cheapest;
  }
  if (!std::isfinite(at(G, C))) {
    throw Error("infeasible demand: no combination of catalog types provides " + std::to_string(G) +
                " GPU(s) and " + std::to_string(C) + " free CPU core(s)");
  }
  return at(G, C);
}

std::vector<ProcurementPlan> procure_ranked(const Catalog& catalog, double x0, const Demand& demand) {
  const double floor_price = cheapest_feasible_price(catalog, demand);
  const double bound = std::max(2.0 * x0, floor_price);
  double cheapest_type = std::numeric_limits<double>::infinity();
  for (const auto& vm : catalog.vm_types) cheapest_type = std::min(cheapest_type, vm.unit_price);
  const int max_instances = static_cast<int>(std::floor(bound / cheapest_type + kPriceEps));
  auto all = enumerate_procurements(catalog, bound, std::max(max_instances, 1));
  std::vector<ProcurementPlan> feasible;
  for (auto& p : all) {
    if (p.satisfies(demand)) feasible.push_back(std::move(p));
  }
  auto counts_of = [&](const ProcurementPlan& p) {
    std::vector<int> v(catalog.vm_types.size(), 0);
    for (const auto& [vm, n] : p.items) {
      for (std::size_t t = 0; t < catalog.vm_types.size(); ++t) {
        if (catalog.vm_types[t].name == vm.name) v[t] = n;
      }
    }
    return v;
  };
  std::stable_sort(feasible.begin(), feasible.end(), [&](const ProcurementPlan& x, const ProcurementPlan& y) {
    const double dx = std::abs(x.unit_price() - x0), dy = std::abs(y.unit_price() - x0);
    if (std::abs(dx - dy) > kPriceEps) return dx < dy;
    if (x.instances() != y.instances()) return x.instances() < y.instances();
    if (x.largest_gpu() != y.largest_gpu()) return x.largest_gpu() > y.largest_gpu();
    return counts_of(x) > counts_of(y);
  });
  if (feasible.empty()) throw Error("infeasible demand within the search bound");
  return feasible;
}

ProcurementPlan procure(const Catalog& catalog, double x0, const Demand& demand) {
  return procure_ranked(catalog, x0, demand).front();
}

double objective(double cost_com, double cost_mon, double eta) {
  check_eta(eta);
  return eta * cost_com + (1.0 - eta) * cost_mon;
}

std::vector<double> normalized_objectives(const std::vector<std::pair<double, double>>& costs, double eta) {
  check_eta(eta);
  if (costs.empty()) return {};
  double lo_t = costs[0].first, hi_t = lo_t, lo_m = costs[0].second, hi_m = lo_m;
  for (const auto& [t, m] : costs) {
    lo_t = std::min(lo_t, t);
    hi_t = std::max(hi_t, t);
    lo_m = std::min(lo_m, m);
    hi_m = std::max(hi_m, m);
  }
  std::vector<double> out;
  for (const auto& [t, m] : costs) {
    const double nt = hi_t > lo_t ? (t - lo_t) / (hi_t - lo_t) : 0.0;
    const double nm = hi_m > lo_m ? (m - lo_m) / (hi_m - lo_m) : 0.0;
    out.push_back(eta * nt + (1.0 - eta) * nm);
  }
  return out;
}

double monetary_cost(double seconds, double unit_price) { return seconds * unit_price / 3600.0; }

} // namespace kgflow
