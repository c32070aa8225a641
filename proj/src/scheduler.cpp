#include "kgflow/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kgflow/error.hpp"

namespace kgflow {

namespace {

std::vector<std::string> topo_or_throw(const Flowline& f) {
  auto order = f.topological_order();
  if (!order) throw Error("flowline contains a cycle");
  return *order;
}

void require_valid(const Flowline& f, const TaskProfile& profile) {
  const auto report = validate(f);
  if (!report.ok()) throw Error("invalid flowline: " + report.summary());
  const auto prof = check_profile(f, profile);
  if (!prof.ok()) throw Error("invalid profile: " + prof.summary());
}

} // namespace

Compounding compound(const Flowline& f) {
  const auto order = topo_or_throw(f);
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

  Compounding out;
  std::set<std::string> taken;
  for (const auto& id : order) {
    if (!f.find(id)->is_model()) continue;
    std::set<std::string> members{id};
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& m : std::vector<std::string>(members.begin(), members.end())) {
        for (const auto& s : f.successors(m)) {
          if (members.contains(s) || f.find(s)->is_model()) continue;
          const auto preds = f.predecessors(s);
          if (std::all_of(preds.begin(), preds.end(), [&](const std::string& p) { return members.contains(p); })) {
            members.insert(s);
            grew = true;
          }
        }
      }
    }
    Compound c;
    c.anchor = id;
    c.members.assign(members.begin(), members.end());
    std::sort(c.members.begin(), c.members.end(),
              [&](const std::string& a, const std::string& b) { return rank[a] < rank[b]; });
    taken.insert(members.begin(), members.end());
    out.compounds.push_back(std::move(c));
  }
  for (const auto& id : order) {
    if (!taken.contains(id)) out.orphans.push_back(id);
  }
  return out;
}

Partition greedy_partition(const Flowline& f, const Compounding& units, const std::vector<VmType>& vms) {
  std::vector<int> gpu_left, cpu_left;
  for (const auto& vm : vms) {
    gpu_left.push_back(vm.gpu_cards);
    cpu_left.push_back(vm.cpu_headroom());
  }
  Partition part;

  auto place = [&](const std::vector<std::string>& members, const std::string& name) {
    int need_gpu = 0, need_cpu = 0;
    std::set<std::string> inside(members.begin(), members.end()), around;
    for (const auto& m : members) {
      (f.find(m)->is_model() ? need_gpu : need_cpu) += 1;
      for (const auto& n : f.neighbors(m)) {
        if (!inside.contains(n)) around.insert(n);
      }
    }
    int best = -1, best_overlap = -1;
    for (std::size_t i = 0; i < vms.size(); ++i) {
      if (gpu_left[i] < need_gpu || cpu_left[i] < need_cpu) continue;
      int overlap = 0;
      for (const auto& n : around) {
        auto it = part.find(n);
        if (it != part.end() && it->second == static_cast<int>(i) + 1) ++overlap;
      }
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) {
      throw Error("infeasible partition: no VM has room for " + name + " (" + std::to_string(need_gpu) +
                  " GPU, " + std::to_string(need_cpu) + " free core)");
    }
    gpu_left[static_cast<std::size_t>(best)] -= need_gpu;
    cpu_left[static_cast<std::size_t>(best)] -= need_cpu;
    for (const auto& m : members) part[m] = best + 1;
  };

  for (const auto& c : units.compounds) {
    place(c.members, "compound '" + c.anchor.value_or(c.members.front()) + "'");
  }
  for (const auto& o : units.orphans) place({o}, "task '" + o + "'");
  return part;
}

Partition refine_partition(const Flowline& f, const TaskProfile& profile, const Compounding& units,
                           const std::vector<VmType>& vms, Partition part, const NetworkParams& net) {
  std::vector<std::vector<std::string>> groups;
  for (const auto& c : units.compounds) groups.push_back(c.members);
  for (const auto& o : units.orphans) groups.push_back({o});
  std::vector<int> need_gpu(groups.size(), 0), need_cpu(groups.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& m : groups[g]) (f.find(m)->is_model() ? need_gpu : need_cpu)[g] += 1;
  }
  auto where = [&](std::size_t g) { return part.at(groups[g].front()); };
  auto fits = [&](const Partition& candidate) {
    std::vector<int> gpu(vms.size(), 0), cpu(vms.size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto vm = static_cast<std::size_t>(candidate.at(groups[g].front()) - 1);
      gpu[vm] += need_gpu[g];
      cpu[vm] += need_cpu[g];
    }
    for (std::size_t i = 0; i < vms.size(); ++i) {
      if (gpu[i] > vms[i].gpu_cards || cpu[i] > vms[i].cpu_headroom()) return false;
    }
    return true;
  };
  auto moved = [&](Partition p, std::size_t g, int vm) {
    for (const auto& m : groups[g]) p[m] = vm;
    return p;
  };

  double current = makespan(apply_partition(f, profile, part, net));
  for (;;) {
    Partition best_part;
    double best = current - 1e-12;
    auto consider = [&](Partition candidate) {
      if (!fits(candidate)) return;
      const double m = makespan(apply_partition(f, profile, candidate, net));
      if (m < best) {
        best = m;
        best_part = std::move(candidate);
      }
    };
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (int vm = 1; vm <= static_cast<int>(vms.size()); ++vm) {
        if (vm != where(g)) consider(moved(part, g, vm));
      }
      for (std::size_t h = g + 1; h < groups.size(); ++h) {
        if (where(g) != where(h)) consider(moved(moved(part, g, where(h)), h, where(g)));
      }
    }
    if (best_part.empty()) return part;
    part = std::move(best_part);
    current = best;
  }
}

double SchedulePlan::unit_price() const {
  double p = 0;
  for (const auto& vm : vms) p += vm.unit_price;
  return p;
}

std::vector<std::pair<std::string, int>> SchedulePlan::procurement() const {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& vm : vms) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == vm.name; });
    if (it == out.end()) {
      out.emplace_back(vm.name, 1);
    } else {
      ++it->second;
    }
  }
  return out;
}

ValidationReport check_qualification(const SchedulePlan& plan, const Flowline& f) {
  ValidationReport report;
  const int k = static_cast<int>(plan.vms.size());
  std::vector<int> models(plan.vms.size(), 0), ops(plan.vms.size(), 0);
  for (const auto& v : f.vertices) {
    auto it = plan.assignment.find(v.id);
    if (it == plan.assignment.end()) {
      report.errors.push_back({"uncovered-task", "uncovered task '" + v.id + "'", v.id});
      continue;
    }
    if (it->second < 1 || it->second > k) {
      report.errors.push_back({"bad-vm-index", "task '" + v.id + "' is assigned to vm " +
                                                   std::to_string(it->second) + " of " + std::to_string(k),
                               v.id});
      continue;
    }
    (v.is_model() ? models : ops)[static_cast<std::size_t>(it->second - 1)] += 1;
  }
  for (const auto& [task, vm] : plan.assignment) {
    if (f.find(task) == nullptr) {
      report.errors.push_back({"unknown-task", "assignment names unknown task '" + task + "'", task});
    }
  }
  for (std::size_t i = 0; i < plan.vms.size(); ++i) {
    const auto& vm = plan.vms[i];
    const std::string where = "vm " + std::to_string(i + 1) + " (" + vm.name + ")";
    if (models[i] > vm.gpu_cards) {
      report.errors.push_back({"gpu-capacity", where + " hosts " + std::to_string(models[i]) +
                                                   " GPU task(s) on " + std::to_string(vm.gpu_cards) + " card(s)"});
    }
    if (ops[i] > vm.cpu_headroom()) {
      report.errors.push_back({"cpu-capacity", where + " hosts " + std::to_string(ops[i]) + " operator(s) on " +
                                                   std::to_string(vm.cpu_headroom()) + " free core(s)"});
    }
  }
  return report;
}

Demand demand_of(const Flowline& f) {
  Demand d;
  for (const auto& v : f.vertices) (v.is_model() ? d.gpus : d.cpus) += 1;
  return d;
}

std::vector<Observation> synthesize_observations(const Flowline& f, const TaskProfile& profile,
                                                 const Catalog& catalog, const NetworkParams& net,
                                                 double max_price) {
  const Demand d = demand_of(f);
  const Compounding units = compound(f);
  std::vector<Observation> out;
  for (const auto& p : enumerate_procurements(catalog, max_price, static_cast<int>(f.vertices.size()))) {
    Observation o{p.unit_price(), std::numeric_limits<double>::infinity()};
    if (p.satisfies(d)) {
      try {
        o.makespan = makespan(apply_partition(f, profile, greedy_partition(f, units, p.expand()), net));
      } catch (const Error&) {
        // Enough resources in total but some compound fits on no single VM.
      }
    }
    out.push_back(o);
  }
  return out;
}

double target_unit_price(const Flowline& f, const TaskProfile& profile, const Catalog& catalog,
                         const ScheduleOptions& options) {
  check_eta(options.eta);
  if (options.prior_fit) return optimal_unit_price(*options.prior_fit, options.eta);
  const double floor_price = cheapest_feasible_price(catalog, demand_of(f));
  const auto obs = synthesize_observations(f, profile, catalog, options.net, 4.0 * floor_price);
  try {
    return optimal_unit_price(fit_price_makespan(obs), options.eta);
  } catch (const Error&) {
    const auto frontier = pareto_frontier(obs);
    if (frontier.empty()) return floor_price;
    const auto best = std::min_element(frontier.begin(), frontier.end(), [&](const Observation& a, const Observation& b) {
      const double eta = options.eta;
      return eta * a.makespan + (1 - eta) * a.unit_price * a.makespan <
             eta * b.makespan + (1 - eta) * b.unit_price * b.makespan;
    });
    return best->unit_price;
  }
}

SchedulePlan schedule(const Flowline& f, const TaskProfile& profile, const Catalog& catalog,
                      const ScheduleOptions& options) {
  check_eta(options.eta);
  require_valid(f, profile);
  if (catalog.vm_types.empty()) throw Error("empty catalog");
  const Demand d = demand_of(f);
  SchedulePlan plan;

  if (d.gpus == 0) {
    // No GPU work: one VM with enough cores, everything co-located.
    const VmType* pick = nullptr;
    for (const auto& vm : catalog.vm_types) {
      if (vm.cpu_headroom() >= d.cpus && (pick == nullptr || vm.unit_price < pick->unit_price)) pick = &vm;
    }
    if (pick != nullptr) {
      plan.vms = {*pick};
      for (const auto& v : f.vertices) plan.assignment[v.id] = 1;
    }
  }
  if (plan.vms.empty()) {
    const Compounding units = compound(f);
    const double x0 = d.gpus == 0 ? 0.0 : target_unit_price(f, profile, catalog, options);
    std::string last_error;
    for (const auto& candidate : procure_ranked(catalog, x0, d)) {
      try {
        auto vms = candidate.expand();
        plan.assignment = greedy_partition(f, units, vms);
        if (options.refine) plan.assignment = refine_partition(f, profile, units, vms, plan.assignment, options.net);
        plan.vms = std::move(vms);
        break;
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    if (plan.vms.empty()) throw Error(last_error.empty() ? "no feasible procurement" : last_error);
  }
  plan.predictions = evaluate_plan(plan, f, profile, options.corpus_rows, options.slice_rows, options.eta,
                                   options.net);
  return plan;
}

PlanPredictions evaluate_plan(const SchedulePlan& plan, const Flowline& f, const TaskProfile& profile,
                              double corpus_rows, double slice_rows, double eta, const NetworkParams& net) {
  const auto g = apply_partition(f, profile, plan.assignment, net);
  PlanPredictions p;
  p.eta = eta;
  p.makespan_s = makespan(g);
  p.cost_com_s = partitioned_time(g, corpus_rows, slice_rows);
  p.cost_mon = monetary_cost(p.cost_com_s, plan.unit_price());
  p.J = objective(p.cost_com_s, p.cost_mon, eta);
  return p;
}

nlohmann::json to_json(const SchedulePlan& plan) {
  nlohmann::json procurement = nlohmann::json::array();
  for (const auto& [type, count] : plan.procurement()) procurement.push_back({{"type", type}, {"count", count}});
  nlohmann::json vms = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.vms.size(); ++i) {
    const auto& vm = plan.vms[i];
    vms.push_back({{"index", i + 1},
                   {"type", vm.name},
                   {"cpu", vm.cpu_cores},
                   {"gpu", vm.gpu_cards},
                   {"price", vm.unit_price}});
  }
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [task, vm] : plan.assignment) assignment[task] = vm;
  const auto& p = plan.predictions;
  return {{"procurement", procurement},
          {"vms", vms},
          {"assignment", assignment},
          {"predictions",
           {{"makespan_s", p.makespan_s}, {"cost_com_s", p.cost_com_s}, {"cost_mon", p.cost_mon}, {"J", p.J},
            {"eta", p.eta}}}};
}

SchedulePlan plan_from_json(const nlohmann::json& doc) {
  SchedulePlan plan;
  try {
    for (const auto& row : doc.at("vms")) {
      plan.vms.push_back({row.at("type").get<std::string>(), row.at("cpu").get<int>(), row.value("gpu", 0),
                          row.at("price").get<double>()});
    }
    for (const auto& [task, vm] : doc.at("assignment").items()) plan.assignment[task] = vm.get<int>();
    if (doc.contains("predictions")) {
      const auto& p = doc.at("predictions");
      plan.predictions = {p.value("makespan_s", 0.0), p.value("cost_com_s", 0.0), p.value("cost_mon", 0.0),
                          p.value("J", 0.0), p.value("eta", 0.5)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad plan document: ") + e.what());
  }
  return plan;
}

} // namespace kgflow
