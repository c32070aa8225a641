#include "kgflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <queue>
#include <random>
#include <sstream>

#include "kgflow/error.hpp"

namespace kgflow {

std::size_t slice_count(double corpus_rows, double slice_rows) {
  if (!(slice_rows >= 1)) throw Error("slice size must be at least 1 row");
  if (corpus_rows < 0) throw Error("corpus size must be non-negative");
  return static_cast<std::size_t>(std::ceil(corpus_rows / slice_rows));
}

namespace {

struct Event {
  double time;
  std::uint64_t seq;
  std::size_t task;
  std::size_t slice;
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

} // namespace

SimResult simulate(const SchedulePlan& plan, const Flowline& f, const TaskProfile& profile, const SimConfig& cfg) {
  if (!(cfg.jitter >= 0)) throw Error("jitter must be non-negative");
  const auto qual = check_qualification(plan, f);
  if (!qual.ok()) throw Error("invalid plan: " + qual.summary());
  const auto g = apply_partition(f, profile, plan.assignment, cfg.net);
  const auto order = f.topological_order();
  if (!order) throw Error("flowline contains a cycle");
  const std::size_t n_slices = slice_count(cfg.corpus_rows, cfg.slice_rows);

  const std::size_t n = order->size();
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx[(*order)[i]] = i;
  std::vector<std::vector<std::pair<std::size_t, double>>> succ(n);  // (task, transfer delay)
  std::vector<int> indeg(n, 0);
  for (const auto& e : f.edges) {
    const auto it = g.edge_weights.find({e.from, e.to});
    succ[idx[e.from]].emplace_back(idx[e.to], it == g.edge_weights.end() ? 0.0 : it->second);
    ++indeg[idx[e.to]];
  }
  const std::size_t entry = idx.at(f.entry.empty() ? order->front() : f.entry);
  const std::size_t exit = idx.at(f.exit.empty() ? order->back() : f.exit);

  // Durations drawn up front in (slice, topological) order.
  std::vector<double> dur(n * n_slices);
  std::mt19937_64 rng(cfg.seed);
  const double sigma = std::sqrt(std::log1p(cfg.jitter * cfg.jitter));
  std::lognormal_distribution<double> noise(-0.5 * sigma * sigma, sigma);
  for (std::size_t s = 0; s < n_slices; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      const double w = profile.vertex_weights.at((*order)[t]);
      dur[s * n + t] = cfg.jitter > 0 ? w * noise(rng) : w;
    }
  }

  const bool serial = cfg.discipline == SimDiscipline::serial;
  std::vector<int> waiting(n * n_slices);
  std::vector<double> ready(n * n_slices, 0.0), start(n * n_slices, -1.0), end(n * n_slices, -1.0);
  for (std::size_t s = 0; s < n_slices; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      // Extra dependency: serial entry waits for the previous slice's exit;
      // pipelined tasks wait for their own previous slice.
      const bool extra = s > 0 && (serial ? t == entry : true);
      waiting[s * n + t] = indeg[t] + (extra ? 1 : 0);
    }
  }

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  std::uint64_t seq = 0;
  auto launch = [&](std::size_t t, std::size_t s) {
    const std::size_t k = s * n + t;
    start[k] = ready[k];
    queue.push({start[k] + dur[k], seq++, t, s});
  };
  auto satisfy = [&](std::size_t t, std::size_t s, double at) {
    const std::size_t k = s * n + t;
    ready[k] = std::max(ready[k], at);
    if (--waiting[k] == 0) launch(t, s);
  };

  SimResult result;
  for (std::size_t s = 0; s < n_slices; ++s) {
    if (waiting[s * n + entry] == 0) launch(entry, s);
  }
  while (!queue.empty()) {
    const Event ev = queue.top();
    queue.pop();
    const std::size_t k = ev.slice * n + ev.task;
    end[k] = ev.time;
    result.timeline.push_back({(*order)[ev.task], ev.slice, plan.assignment.at((*order)[ev.task]), start[k], end[k]});
    for (const auto& [to, delay] : succ[ev.task]) satisfy(to, ev.slice, ev.time + delay);
    if (ev.slice + 1 < n_slices) {
      if (!serial) satisfy(ev.task, ev.slice + 1, ev.time);
      if (serial && ev.task == exit) satisfy(entry, ev.slice + 1, ev.time);
    }
  }

  for (std::size_t s = 0; s < n_slices; ++s) {
    result.per_slice_makespan.push_back(end[s * n + exit] - start[s * n + entry]);
    result.total_time = std::max(result.total_time, end[s * n + exit]);
  }
  result.monetary_cost = monetary_cost(result.total_time, plan.unit_price());
  return result;
}

nlohmann::json to_json(const SimResult& r) {
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& run : r.timeline) {
    timeline.push_back({{"task", run.task}, {"slice", run.slice}, {"vm", run.vm}, {"start", run.start}, {"end", run.end}});
  }
  return {{"total_time", r.total_time},
          {"per_slice_makespan", r.per_slice_makespan},
          {"monetary_cost", r.monetary_cost},
          {"timeline", timeline}};
}

nlohmann::json chrome_trace(const SimResult& r, const Flowline& f) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& run : r.timeline) {
    events.push_back({{"name", run.task},
                      {"cat", "slice"},
                      {"ph", "X"},
                      {"ts", run.start * 1e6},
                      {"dur", (run.end - run.start) * 1e6},
                      {"pid", run.vm},
                      {"tid", static_cast<int>(f.index_of(run.task).value_or(0))},
                      {"args", {{"slice", run.slice}}}});
  }
  return {{"traceEvents", events}, {"displayTimeUnit", "ms"}};
}

SchedulePlan baseline_random(const Flowline& f, const Catalog& catalog, std::uint64_t seed) {
  const Demand d = demand_of(f);
  const double floor_price = cheapest_feasible_price(catalog, d);
  std::vector<ProcurementPlan> feasible;
  for (auto& p : enumerate_procurements(catalog, 4.0 * floor_price + 1e-9, static_cast<int>(f.vertices.size()))) {
    if (!p.satisfies(d)) continue;
    // Skip procurements with an instance that could be dropped outright.
    bool minimal = true;
    for (std::size_t i = 0; i < p.items.size() && minimal; ++i) {
      ProcurementPlan less = p;
      if (--less.items[i].second == 0) less.items.erase(less.items.begin() + static_cast<std::ptrdiff_t>(i));
      if (!less.items.empty() && less.satisfies(d)) minimal = false;
    }
    if (minimal) feasible.push_back(std::move(p));
  }
  if (feasible.empty()) throw Error("infeasible catalog: no procurement satisfies the demand");
  std::mt19937_64 rng(seed);
  SchedulePlan plan;
  plan.vms = feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)].expand();

  std::vector<int> gpu_left, cpu_left;
  for (const auto& vm : plan.vms) {
    gpu_left.push_back(vm.gpu_cards);
    cpu_left.push_back(vm.cpu_headroom());
  }
  std::vector<std::string> tasks;
  for (const auto& v : f.vertices) tasks.push_back(v.id);
  std::shuffle(tasks.begin(), tasks.end(), rng);
  // Each task needs one slot of its class and totals cover the demand, so
  // this never dead-ends.
  for (const auto& id : tasks) {
    const bool model = f.find(id)->is_model();
    auto& left = model ? gpu_left : cpu_left;
    std::vector<int> open;
    for (std::size_t i = 0; i < left.size(); ++i) {
      if (left[i] > 0) open.push_back(static_cast<int>(i));
    }
    const int vm = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    --left[static_cast<std::size_t>(vm)];
    plan.assignment[id] = vm + 1;
  }
  return plan;
}

SchedulePlan baseline_list(const Flowline& f, const TaskProfile& profile, const Catalog& catalog,
                           const NetworkParams& net) {
  if (!(net.bandwidth_bps > 0)) throw Error("zero bandwidth");
  const auto order = f.topological_order();
  if (!order) throw Error("flowline contains a cycle");
  SchedulePlan plan;
  plan.vms = procure(catalog, 0.0, demand_of(f)).expand();

  auto comm = [&](const std::string& a, const std::string& b) {
    const auto it = profile.edge_payloads.find({a, b});
    return net.latency_s + (it == profile.edge_payloads.end() ? 0.0 : it->second) / net.bandwidth_bps;
  };
  std::map<std::string, double> rank;
  std::map<std::string, std::size_t> topo;
  for (std::size_t i = 0; i < order->size(); ++i) topo[(*order)[i]] = i;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    double tail = 0.0;
    for (const auto& s : f.successors(*it)) tail = std::max(tail, comm(*it, s) + rank.at(s));
    rank[*it] = profile.vertex_weights.at(*it) + tail;
  }
  std::vector<std::string> tasks = *order;
  std::stable_sort(tasks.begin(), tasks.end(), [&](const std::string& a, const std::string& b) {
    return rank.at(a) != rank.at(b) ? rank.at(a) > rank.at(b) : topo.at(a) < topo.at(b);
  });

  std::vector<int> gpu_left, cpu_left;
  for (const auto& vm : plan.vms) {
    gpu_left.push_back(vm.gpu_cards);
    cpu_left.push_back(vm.cpu_headroom());
  }
  std::map<std::string, double> finish;
  for (const auto& id : tasks) {
    const bool model = f.find(id)->is_model();
    auto& left = model ? gpu_left : cpu_left;
    int best = -1;
    double best_eft = 0.0;
    for (std::size_t i = 0; i < plan.vms.size(); ++i) {
      if (left[i] <= 0) continue;
      double est = 0.0;
      for (const auto& p : f.predecessors(id)) {
        const bool same = plan.assignment.at(p) == static_cast<int>(i) + 1;
        est = std::max(est, finish.at(p) + (same ? 0.0 : comm(p, id)));
      }
      const double eft = est + profile.vertex_weights.at(id);
      if (best < 0 || eft < best_eft) {
        best = static_cast<int>(i);
        best_eft = eft;
      }
    }
    if (best < 0) throw Error("infeasible catalog: no VM left for task '" + id + "'");
    --left[static_cast<std::size_t>(best)];
    plan.assignment[id] = best + 1;
    finish[id] = best_eft;
  }
  return plan;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

std::vector<SweepRow> sweep_eta(const Flowline& f, const TaskProfile& profile, const Catalog& catalog,
                                const std::vector<double>& etas, const SweepConfig& config) {
  if (etas.empty()) throw Error("sweep needs at least one eta");
  struct Run {
    double makespan, total, cost;
  };
  auto run = [&](const SchedulePlan& plan) {
    const auto r = simulate(plan, f, profile, config.sim);
    const double m = makespan(apply_partition(f, profile, plan.assignment, config.sim.net));
    return Run{m, r.total_time, r.monetary_cost};
  };

  const Run list = run(baseline_list(f, profile, catalog, config.sim.net));
  std::vector<Run> randoms;
  for (int s = 0; s < config.random_plans; ++s) {
    randoms.push_back(run(baseline_random(f, catalog, config.sim.seed + static_cast<std::uint64_t>(s))));
  }

  std::vector<SweepRow> rows;
  for (double eta : etas) {
    check_eta(eta);
    ScheduleOptions opt;
    opt.eta = eta;
    opt.net = config.sim.net;
    opt.corpus_rows = config.sim.corpus_rows;
    opt.slice_rows = config.sim.slice_rows;
    opt.prior_fit = config.prior_fit;
    const Run heuristic = run(schedule(f, profile, catalog, opt));

    std::vector<std::pair<double, double>> costs{{heuristic.total, heuristic.cost}, {list.total, list.cost}};
    for (const auto& r : randoms) costs.emplace_back(r.total, r.cost);
    const auto j = normalized_objectives(costs, eta);

    rows.push_back({eta, "heuristic", heuristic.makespan, heuristic.total, heuristic.cost, j[0]});
    rows.push_back({eta, "list", list.makespan, list.total, list.cost, j[1]});
    if (!randoms.empty()) {
      std::vector<double> m, t, c, jr(j.begin() + 2, j.end());
      for (const auto& r : randoms) {
        m.push_back(r.makespan);
        t.push_back(r.total);
        c.push_back(r.cost);
      }
      rows.push_back({eta, "random", median(m), median(t), median(c), median(jr)});
    }
  }
  return rows;
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "eta,scheduler,makespan_s,total_time_s,cost_mon,J\n";
  for (const auto& r : rows) {
    os << r.eta << ',' << r.scheduler << ',' << r.makespan_s << ',' << r.total_time_s << ',' << r.cost_mon << ','
       << r.J << '\n';
  }
  return os.str();
}

} // namespace kgflow
