#include <algorithm>
#include <functional>
#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "kgflow/error.hpp"
#include "kgflow/json_io.hpp"
#include "kgflow/scheduler.hpp"
#include "support/random_dag.hpp"

using namespace kgflow;

namespace {

Flowline example() { return load_flowline(KGFLOW_DATA_DIR "/running_example.json"); }
TaskProfile example_profile() { return profile_from_json(read_json_file(KGFLOW_DATA_DIR "/running_example_profile.json")); }
Catalog qcloud() { return load_catalog(KGFLOW_DATA_DIR "/qcloud_catalog.json"); }

MakespanPriceFit paper_fit() {
  MakespanPriceFit fit;
  fit.a = 4.17, fit.b = 5.15, fit.c = 23.96;
  return fit;
}

TaskNode node(const std::string& id, TaskKind kind) {
  TaskNode v;
  v.id = v.label = v.function = id;
  v.kind = kind;
  if (kind == TaskKind::op) v.family = OperatorFamily::mapper;
  return v;
}

Flowline make(std::vector<TaskNode> vs, std::vector<std::pair<std::string, std::string>> es) {
  Flowline f;
  f.vertices = std::move(vs);
  for (auto& [a, b] : es) f.edges.push_back({a, b, {}});
  return f;
}

TaskProfile uniform_profile(const Flowline& f, double w, double bytes) {
  TaskProfile p;
  for (const auto& v : f.vertices) p.vertex_weights[v.id] = w;
  for (const auto& e : f.edges) p.edge_payloads[{e.from, e.to}] = bytes;
  return p;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST(Compound, ExampleTrace) {
  const auto units = compound(example());
  ASSERT_EQ(units.compounds.size(), 3u);
  EXPECT_EQ(units.compounds[0].members, (std::vector<std::string>{"1", "2", "3", "4", "5"}));
  EXPECT_EQ(units.compounds[1].members, (std::vector<std::string>{"6"}));
  EXPECT_EQ(units.compounds[2].members, (std::vector<std::string>{"7"}));
  EXPECT_EQ(units.compounds[0].anchor, "1");
  EXPECT_EQ(units.orphans, (std::vector<std::string>{"8", "9"}));
}

TEST(Compound, TrivialShapes) {
  auto single = make({node("m", TaskKind::model_ce)}, {});
  auto u = compound(single);
  ASSERT_EQ(u.compounds.size(), 1u);
  EXPECT_EQ(u.compounds[0].members, (std::vector<std::string>{"m"}));
  EXPECT_TRUE(u.orphans.empty());

  auto chain = make({node("m", TaskKind::model_ce), node("o1", TaskKind::op), node("o2", TaskKind::op)},
                    {{"m", "o1"}, {"o1", "o2"}});
  u = compound(chain);
  ASSERT_EQ(u.compounds.size(), 1u);
  EXPECT_EQ(u.compounds[0].members, (std::vector<std::string>{"m", "o1", "o2"}));
}

TEST(GreedyPartition, ExampleTrace) {
  const auto f = example();
  const auto& cat = qcloud().vm_types;
  const std::vector<VmType> vms{cat[1], cat[0]};  // 5X, 2X
  const auto part = greedy_partition(f, compound(f), vms);
  const Partition want{{"1", 1}, {"2", 1}, {"3", 1}, {"4", 1}, {"5", 1},
                       {"6", 1}, {"7", 2}, {"8", 1}, {"9", 1}};
  EXPECT_EQ(part, want);
}

TEST(GreedyPartition, OneLargeVmTakesEverything) {
  const auto f = example();
  const auto part = greedy_partition(f, compound(f), {qcloud().vm_types[3]});
  for (const auto& [task, vm] : part) EXPECT_EQ(vm, 1) << task;
}

TEST(GreedyPartition, DisconnectedCompoundsSplitByCapacity) {
  auto f = make({node("e", TaskKind::op), node("m1", TaskKind::model_ce), node("o1", TaskKind::op),
                 node("m2", TaskKind::model_cc), node("o2", TaskKind::op), node("x", TaskKind::op)},
                {{"e", "m1"}, {"m1", "o1"}, {"o1", "x"}, {"e", "m2"}, {"m2", "o2"}, {"o2", "x"}});
  const std::vector<VmType> vms{{"a", 4, 1, 1.0}, {"b", 4, 1, 1.0}};
  const auto part = greedy_partition(f, compound(f), vms);
  EXPECT_EQ(part.at("m1"), part.at("o1"));
  EXPECT_EQ(part.at("m2"), part.at("o2"));
  EXPECT_NE(part.at("m1"), part.at("m2"));
}

TEST(GreedyPartition, InfeasibleNamesTheUnit) {
  const auto f = example();
  try {
    greedy_partition(f, compound(f), {qcloud().vm_types[0]});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("compound '6'"), std::string::npos) << e.what();
  }
}

TEST(Qualification, Examples) {
  auto f = make({node("m1", TaskKind::model_ce), node("m2", TaskKind::model_ce)}, {{"m1", "m2"}});
  SchedulePlan plan;
  plan.vms = {{"one", 4, 1, 1.0}};
  plan.assignment = {{"m1", 1}, {"m2", 1}};
  EXPECT_TRUE(check_qualification(plan, f).has_error("gpu-capacity"));
  plan.assignment = {{"m1", 1}};
  const auto report = check_qualification(plan, f);
  ASSERT_TRUE(report.has_error("uncovered-task"));
  EXPECT_NE(report.summary().find("uncovered task"), std::string::npos);

  const auto g = example();
  const auto& cat = qcloud().vm_types;
  SchedulePlan good;
  good.vms = {cat[1], cat[0]};
  good.assignment = greedy_partition(g, compound(g), good.vms);
  EXPECT_TRUE(check_qualification(good, g).ok());
}

TEST(CompoundProperty, PartitionOfVertices) {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> size(1, 14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng), 0.3, 0.4);
    const auto u = compound(f);
    std::multiset<std::string> seen;
    for (const auto& c : u.compounds) {
      seen.insert(c.members.begin(), c.members.end());
      const auto members = as_set(c.members);
      ASSERT_TRUE(c.anchor.has_value());
      EXPECT_EQ(std::count_if(c.members.begin(), c.members.end(),
                              [&](const std::string& m) { return f.find(m)->is_model(); }),
                1);
      // Every member reachable from the anchor through members only.
      std::set<std::string> reached{*c.anchor};
      std::queue<std::string> q;
      q.push(*c.anchor);
      while (!q.empty()) {
        for (const auto& s : f.successors(q.front())) {
          if (members.contains(s) && reached.insert(s).second) q.push(s);
        }
        q.pop();
      }
      EXPECT_EQ(reached, members);
    }
    seen.insert(u.orphans.begin(), u.orphans.end());
    EXPECT_EQ(seen.size(), f.vertices.size());
    for (const auto& v : f.vertices) EXPECT_EQ(seen.count(v.id), 1u) << v.id;
  }
}

TEST(GreedyPartitionProperty, QualifiedAndNoInternalCut) {
  std::mt19937 rng(37);
  std::uniform_int_distribution<int> size(2, 14), gpus(1, 3), extra(1, 6);
  int placed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng), 0.3, 0.4);
    std::vector<VmType> vms;
    const int k = 1 + trial % 4;
    for (int i = 0; i < k; ++i) {
      const int g = gpus(rng);
      vms.push_back({"vm", g + extra(rng) + 3, g, 1.0});
    }
    std::stable_sort(vms.begin(), vms.end(), [](const VmType& a, const VmType& b) { return a.gpu_cards > b.gpu_cards; });
    const auto u = compound(f);
    SchedulePlan plan;
    plan.vms = vms;
    try {
      plan.assignment = greedy_partition(f, u, vms);
    } catch (const Error&) {
      continue;
    }
    ++placed;
    EXPECT_TRUE(check_qualification(plan, f).ok()) << check_qualification(plan, f).summary();
    for (const auto& c : u.compounds) {
      const auto members = as_set(c.members);
      for (const auto& e : f.edges) {
        if (members.contains(e.from) && members.contains(e.to)) {
          EXPECT_EQ(plan.assignment.at(e.from), plan.assignment.at(e.to));
        }
      }
    }
  }
  EXPECT_GT(placed, 100);
}

TEST(Schedule, CpuOnlyFlowlineUsesOneVm) {
  auto f = make({node("a", TaskKind::op), node("b", TaskKind::op), node("c", TaskKind::op),
                 node("d", TaskKind::op), node("e", TaskKind::op)},
                {{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "e"}});
  const auto plan = schedule(f, uniform_profile(f, 0.1, 1000), qcloud(), {});
  ASSERT_EQ(plan.vms.size(), 1u);
  EXPECT_GE(plan.vms[0].cpu_cores, 5);
  EXPECT_EQ(plan.vms[0].name, "2XLARGE40");
  for (const auto& [task, vm] : plan.assignment) EXPECT_EQ(vm, 1);
}

TEST(Schedule, ExamplePicksTwoVmPlan) {
  ScheduleOptions opt;
  opt.prior_fit = paper_fit();
  const auto plan = schedule(example(), example_profile(), qcloud(), opt);
  EXPECT_NEAR(plan.unit_price(), 35.94, 1e-9);
  const std::vector<std::pair<std::string, int>> want{{"5XLARGE80", 1}, {"2XLARGE40", 1}};
  EXPECT_EQ(plan.procurement(), want);
  EXPECT_TRUE(check_qualification(plan, example()).ok());
}

TEST(Schedule, SmallEtaGoesToFeasibilityFloor) {
  ScheduleOptions opt;
  opt.eta = 1e-6;
  MakespanPriceFit steep = paper_fit();
  steep.b = 500;
  opt.prior_fit = steep;
  const auto plan = schedule(example(), example_profile(), qcloud(), opt);
  EXPECT_NEAR(plan.unit_price(), cheapest_feasible_price(qcloud(), demand_of(example())), 1e-9);
}

TEST(Schedule, WarmUpFitPathIsDeterministic) {
  ScheduleOptions opt;
  opt.corpus_rows = 8000;
  const auto a = to_json(schedule(example(), example_profile(), qcloud(), opt)).dump();
  const auto b = to_json(schedule(example(), example_profile(), qcloud(), opt)).dump();
  EXPECT_EQ(a, b);
  EXPECT_TRUE(check_qualification(plan_from_json(nlohmann::json::parse(a)), example()).ok());
}

TEST(Schedule, SynthesizedObservationsMarkInfeasibleCombos) {
  const auto obs = synthesize_observations(example(), example_profile(), qcloud(), {}, 50);
  bool saw_inf = false, saw_finite = false;
  for (const auto& o : obs) {
    if (o.unit_price < 35.0) {
      EXPECT_FALSE(std::isfinite(o.makespan)) << o.unit_price;
    }
    (std::isfinite(o.makespan) ? saw_finite : saw_inf) = true;
  }
  EXPECT_TRUE(saw_inf);
  EXPECT_TRUE(saw_finite);
}

TEST(EvaluatePlan, CostAccounting) {
  auto f = make({node("only", TaskKind::op)}, {});
  TaskProfile p;
  p.vertex_weights["only"] = 4.65;
  SchedulePlan plan;
  plan.vms = {{"unit", 4, 0, 35.94}};
  plan.assignment = {{"only", 1}};
  const auto one = evaluate_plan(plan, f, p, 200, 200, 0.5, {});
  EXPECT_NEAR(one.cost_mon, 0.0464, 5e-5);
  const auto two = evaluate_plan(plan, f, p, 400, 200, 0.5, {});
  EXPECT_NEAR(two.cost_com_s, 2 * one.cost_com_s, 1e-12);
  EXPECT_NEAR(two.cost_mon, 2 * one.cost_mon, 1e-12);
  EXPECT_NEAR(two.J, 2 * one.J, 1e-12);
}

TEST(EvaluatePlan, DominanceImpliesLowerObjective) {
  const auto f = example();
  const auto prof = example_profile();
  const auto units = compound(f);
  std::vector<std::pair<double, double>> costs;
  for (const auto& proc : enumerate_procurements(qcloud(), 200, 4)) {
    if (!proc.satisfies(demand_of(f))) continue;
    SchedulePlan plan;
    plan.vms = proc.expand();
    try {
      plan.assignment = greedy_partition(f, units, plan.vms);
    } catch (const Error&) {
      continue;
    }
    const auto p = evaluate_plan(plan, f, prof, 8000, 200, 0.5, {0.05, 1e6});
    costs.emplace_back(p.cost_com_s, p.cost_mon);
  }
  ASSERT_GT(costs.size(), 5u);
  int pairs = 0;
  for (double eta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto norm = normalized_objectives(costs, eta);
    for (std::size_t i = 0; i < costs.size(); ++i) {
      for (std::size_t j = 0; j < costs.size(); ++j) {
        if (costs[i].first < costs[j].first && costs[i].second < costs[j].second) {
          EXPECT_LT(objective(costs[i].first, costs[i].second, eta), objective(costs[j].first, costs[j].second, eta));
          EXPECT_LT(norm[i], norm[j]);
          ++pairs;
        }
      }
    }
  }
  EXPECT_GT(pairs, 0);
}

TEST(ScheduleProperty, HeuristicQualityFloor) {
  // Small flowlines, two VM types: the scheduled partition must be no worse
  // than at least 90% of all qualified partitions on the same procurement.
  std::mt19937 rng(41);
  std::uniform_int_distribution<int> size(3, 6);
  const Catalog cat{"", {{"small", 4, 1, 1.0}, {"big", 8, 2, 1.9}}};
  const NetworkParams net{0.05, 1e5};
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng), 0.4, 0.4);
    const auto prof = testsupport::random_profile(rng, f);
    ScheduleOptions opt;
    opt.net = net;
    const auto plan = schedule(f, prof, cat, opt);
    const double mine = plan.predictions.J;
    const int k = static_cast<int>(plan.vms.size());
    int total = 0, not_better = 0;
    SchedulePlan probe = plan;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == f.vertices.size()) {
        if (!check_qualification(probe, f).ok()) return;
        ++total;
        const auto p = evaluate_plan(probe, f, prof, opt.corpus_rows, opt.slice_rows, opt.eta, net);
        if (p.J >= mine - 1e-12) ++not_better;
        return;
      }
      for (int vm = 1; vm <= k; ++vm) {
        probe.assignment[f.vertices[i].id] = vm;
        rec(i + 1);
      }
    };
    rec(0);
    ASSERT_GT(total, 0);
    EXPECT_GE(not_better, 0.9 * total) << "trial " << trial << ": " << not_better << "/" << total;
    ++checked;
  }
  EXPECT_EQ(checked, 40);
}

TEST(PlanJson, RoundTrip) {
  ScheduleOptions opt;
  opt.prior_fit = paper_fit();
  const auto plan = schedule(example(), example_profile(), qcloud(), opt);
  const auto doc = to_json(plan);
  EXPECT_EQ(to_json(plan_from_json(doc)), doc);
  EXPECT_EQ(doc.at("procurement").size(), 2u);
  EXPECT_EQ(doc.at("assignment").at("7"), 2);
}

TEST(RefineProperty, NeverWorseAndStillQualified) {
  std::mt19937 rng(43);
  std::uniform_int_distribution<int> size(3, 12);
  const std::vector<VmType> vms{{"big", 8, 2, 1.9}, {"small", 4, 1, 1.0}, {"small", 4, 1, 1.0}};
  const NetworkParams net{0.05, 1e5};
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng), 0.3, 0.3);
    const auto prof = testsupport::random_profile(rng, f);
    const auto units = compound(f);
    Partition greedy;
    try {
      greedy = greedy_partition(f, units, vms);
    } catch (const Error&) {
      continue;
    }
    SchedulePlan plan;
    plan.vms = vms;
    plan.assignment = refine_partition(f, prof, units, vms, greedy, net);
    EXPECT_TRUE(check_qualification(plan, f).ok());
    EXPECT_LE(makespan(apply_partition(f, prof, plan.assignment, net)),
              makespan(apply_partition(f, prof, greedy, net)) + 1e-12);
    for (const auto& c : units.compounds) {
      for (const auto& m : c.members) EXPECT_EQ(plan.assignment.at(m), plan.assignment.at(c.members.front()));
    }
    ++checked;
  }
  EXPECT_GT(checked, 50);
}
