#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "kgflow/cost_model.hpp"
#include "kgflow/error.hpp"

using namespace kgflow;

namespace {

const PriceFit kReferenceTheta{0.0565, 0.3, {}};

Catalog g4dn() { return load_catalog(KGFLOW_DATA_DIR "/g4dn_catalog.json"); }
Catalog qcloud() { return load_catalog(KGFLOW_DATA_DIR "/qcloud_catalog.json"); }

// Independent brute force: all count vectors with price <= bound.
std::vector<std::vector<int>> all_multisets(const Catalog& c, double bound) {
  std::vector<std::vector<int>> out;
  std::vector<int> counts(c.vm_types.size(), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double price) {
    if (i == counts.size()) {
      if (std::any_of(counts.begin(), counts.end(), [](int n) { return n > 0; })) out.push_back(counts);
      return;
    }
    for (int n = 0; price + n * c.vm_types[i].unit_price <= bound + 1e-9; ++n) {
      counts[i] = n;
      rec(i + 1, price + n * c.vm_types[i].unit_price);
    }
    counts[i] = 0;
  };
  rec(0, 0.0);
  return out;
}

std::vector<Observation> brute_force_pareto(const std::vector<Observation>& obs) {
  std::vector<Observation> out;
  for (const auto& p : obs) {
    if (!std::isfinite(p.makespan)) continue;
    bool drop = false;
    for (const auto& q : obs) {
      if (!std::isfinite(q.makespan)) continue;
      if (q.unit_price == p.unit_price && q.makespan < p.makespan) drop = true;
      if (q.unit_price < p.unit_price && q.makespan < p.makespan) drop = true;
    }
    const bool dup = std::any_of(out.begin(), out.end(), [&](const Observation& o) {
      return o.unit_price == p.unit_price;
    });
    if (!drop && !dup) out.push_back(p);
  }
  std::sort(out.begin(), out.end(),
            [](const Observation& x, const Observation& y) { return x.unit_price < y.unit_price; });
  return out;
}

} // namespace

TEST(VmPrice, CatalogRowsAtReferenceTheta) {
  EXPECT_NEAR(vm_price(4, 1, kReferenceTheta), 0.526, 1e-12);
  EXPECT_NEAR(vm_price(48, 4, kReferenceTheta), 3.912, 1e-12);
  EXPECT_EQ(vm_price(0, 0, kReferenceTheta), 0.0);
}

TEST(VmPrice, Linear) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 50);
  for (int i = 0; i < 50; ++i) {
    const double c = u(rng), g = u(rng) / 10, k = u(rng) / 5;
    EXPECT_NEAR(vm_price(k * c, k * g, kReferenceTheta), k * vm_price(c, g, kReferenceTheta), 1e-9);
  }
}

TEST(PriceFit, TwoPointCatalogIsExact) {
  const std::vector<VmType> rows{{"a", 4, 1, 0.526}, {"b", 8, 1, 0.752}};
  for (auto w : {PriceFitWeighting::relative, PriceFitWeighting::absolute}) {
    const auto fit = fit_price_linear(rows, w);
    EXPECT_NEAR(fit.theta1, 0.0565, 1e-12);
    EXPECT_NEAR(fit.theta2, 0.3, 1e-12);
  }
}

TEST(PriceFit, ErrorColumnAtReferenceTheta) {
  const auto errs = price_errors(g4dn().vm_types, 0.0565, 0.3);
  // Rows: xlarge, 2xlarge, 4xlarge, 8xlarge, 16xlarge, 12xlarge, metal.
  const std::vector<double> expected{0, 0, 0, 3.13, 10.02, 0, 0};
  ASSERT_EQ(errs.size(), expected.size());
  for (std::size_t i = 0; i < errs.size(); ++i) EXPECT_NEAR(errs[i], expected[i], 0.05) << i;
}

TEST(PriceFit, FullCatalogWithinTenPercent) {
  const auto fit = fit_price_linear(g4dn().vm_types);
  EXPECT_NEAR(fit.theta1, 0.0565, 0.1 * 0.0565);
  EXPECT_NEAR(fit.theta2, 0.3, 0.1 * 0.3);
  EXPECT_EQ(fit.relative_errors.size(), 7u);
}

TEST(PriceFit, DegenerateInputs) {
  EXPECT_THROW(fit_price_linear({{"a", 4, 1, 0.5}}), Error);
  EXPECT_THROW(fit_price_linear({{"a", 4, 1, 0.5}, {"b", 8, 2, 1.0}}), Error);
}

TEST(PriceFit, RecoversGeneratingTheta) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> theta(0.01, 1.0);
  std::uniform_int_distribution<int> cores(1, 96), cards(0, 8);
  for (int trial = 0; trial < 30; ++trial) {
    const double t1 = theta(rng), t2 = theta(rng);
    std::vector<VmType> rows;
    for (int i = 0; i < 6; ++i) {
      const int g = cards(rng);
      const int c = std::max(g, cores(rng));
      rows.push_back({"r", c, g, t1 * c + t2 * g});
    }
    rows.push_back({"x", 2, 0, 2 * t1});
    rows.push_back({"y", 2, 1, 2 * t1 + t2});
    const auto fit = fit_price_linear(rows);
    EXPECT_NEAR(fit.theta1, t1, 1e-9);
    EXPECT_NEAR(fit.theta2, t2, 1e-9);
  }
}

TEST(MakespanFit, BundledObservations) {
  const auto obs = observations_from_json(nlohmann::json::parse(R"({"observations": [
    {"unit_price": 23.96, "makespan": null}, {"unit_price": 35.94, "makespan": 5.10},
    {"unit_price": 35.94, "makespan": 4.65}, {"unit_price": 47.92, "makespan": 4.34},
    {"unit_price": 47.92, "makespan": 4.26}, {"unit_price": 95.84, "makespan": 4.25},
    {"unit_price": 191.68, "makespan": 4.25}]})"));
  const auto frontier = pareto_frontier(obs);
  ASSERT_EQ(frontier.size(), 4u);
  EXPECT_EQ(frontier[0].makespan, 4.65);
  EXPECT_EQ(frontier[1].makespan, 4.26);
  const auto fit = fit_price_makespan(obs);
  EXPECT_NEAR(fit.a, 4.17, 0.15 * 4.17);
  EXPECT_NEAR(fit.b, 5.15, 0.15 * 5.15);
  EXPECT_NEAR(fit.c, 23.96, 0.15 * 23.96);
  EXPECT_TRUE(fit.c_pinned);
}

TEST(MakespanFit, NoiselessRecovery) {
  const double a = 2, b = 10, c = 5;
  std::vector<Observation> obs;
  for (double x : {6.0, 7.0, 9.0, 12.0, 20.0}) obs.push_back({x, a + b / (x - c)});
  const auto fit = fit_price_makespan(obs);
  EXPECT_FALSE(fit.c_pinned);
  EXPECT_LT(fit.sse, 1e-9);
  EXPECT_NEAR(fit.a, a, 1e-5);
  EXPECT_NEAR(fit.b, b, 1e-5);
  EXPECT_NEAR(fit.c, c, 1e-5);

  // Same curve with an infeasible probe at c itself.
  obs.push_back({5.0, std::numeric_limits<double>::infinity()});
  const auto pinned = fit_price_makespan(obs);
  EXPECT_TRUE(pinned.c_pinned);
  EXPECT_LT(pinned.sse, 1e-9);
  EXPECT_NEAR(pinned.a, a, 1e-9);
}

TEST(MakespanFit, TooFewPoints) {
  EXPECT_THROW(fit_price_makespan({{10, 3}, {20, 2}}), Error);
  // Three prices, but two are dominated away.
  EXPECT_THROW(fit_price_makespan({{10, 3}, {20, 4}, {30, 5}}), Error);
}

TEST(ParetoProperty, MatchesBruteForce) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> price(1, 12), count(1, 15);
  std::uniform_real_distribution<double> span(1, 10), coin(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Observation> obs;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      obs.push_back({static_cast<double>(price(rng)),
                     coin(rng) < 0.1 ? std::numeric_limits<double>::infinity() : std::round(span(rng))});
    }
    const auto got = pareto_frontier(obs);
    const auto want = brute_force_pareto(obs);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].unit_price, want[i].unit_price);
      EXPECT_EQ(got[i].makespan, want[i].makespan);
    }
  }
}

TEST(OptimalPrice, Examples) {
  MakespanPriceFit fit;
  fit.a = 4.17, fit.b = 5.15, fit.c = 23.96;
  EXPECT_NEAR(optimal_unit_price(fit, 0.5), 25.07, 0.02);
  EXPECT_NEAR(optimal_unit_price(fit, 1e-12), 23.96, 1e-5);
  EXPECT_THROW(optimal_unit_price(fit, 1.0), Error);
  MakespanPriceFit unit;
  unit.a = 1, unit.b = 1, unit.c = 0;
  EXPECT_NEAR(optimal_unit_price(unit, 0.8), 2.0, 1e-12);
}

TEST(OptimalPrice, CurveShapeAndGridMinimum) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> pos(0.5, 10), pref(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    MakespanPriceFit fit;
    fit.a = pos(rng), fit.b = pos(rng), fit.c = pos(rng);
    const double eta = pref(rng);
    const double x0 = optimal_unit_price(fit, eta);
    EXPECT_GT(x0, fit.c);
    // g strictly decreasing and convex on (c, inf).
    for (double x = fit.c + 0.1; x < fit.c + 20; x += 0.5) {
      EXPECT_GT(fit(x), fit(x + 0.1));
      EXPECT_GT(fit(x) + fit(x + 0.2), 2 * fit(x + 0.1));
    }
    // The closed form is the stationary point of η·g(x) + (1−η)·a·(x − c).
    const double step = 1e-3;
    double best_x = 0, best = std::numeric_limits<double>::infinity();
    for (double x = fit.c + step; x < fit.c + 30; x += step) {
      const double j = eta * fit(x) + (1 - eta) * fit.a * (x - fit.c);
      if (j < best) best = j, best_x = x;
    }
    EXPECT_NEAR(best_x, x0, step);
  }
}

TEST(Procure, ThreeGpuDemandPlan) {
  const auto plan = procure(qcloud(), 25.08, {3, 0});
  EXPECT_NEAR(plan.unit_price(), 35.94, 1e-9);
  EXPECT_EQ(plan.describe(), "2XLARGE40 x1 + 5XLARGE80 x1");
  const auto vms = plan.expand();
  ASSERT_EQ(vms.size(), 2u);
  EXPECT_EQ(vms[0].name, "5XLARGE80");
  EXPECT_EQ(vms[1].name, "2XLARGE40");
}

TEST(Procure, CpuOnlyDemandTakesCheapestInstance) {
  const auto plan = procure(qcloud(), 0.0, {0, 1});
  EXPECT_EQ(plan.describe(), "2XLARGE40 x1");
}

TEST(Procure, ClosestFeasiblePrice) {
  Catalog c{"", {{"one", 4, 1, 10}, {"two", 8, 2, 19}}};
  const auto plan = procure(c, 25, {2, 0});
  EXPECT_NEAR(plan.unit_price(), 29, 1e-9);
  EXPECT_EQ(plan.instances(), 2);
}

TEST(Procure, InfeasibleDemand) {
  Catalog c{"", {{"cpu", 4, 0, 1}}};
  EXPECT_THROW(procure(c, 5, {1, 0}), Error);
}

TEST(ProcureProperty, MinimalDistanceAgainstEnumeration) {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> types(1, 3), gpu(0, 3), extra(1, 8), demand_g(0, 4), demand_c(0, 6);
  std::uniform_real_distribution<double> price(1, 10), target(0, 30);
  for (int trial = 0; trial < 150; ++trial) {
    Catalog c;
    const int nt = types(rng);
    for (int i = 0; i < nt; ++i) {
      const int g = gpu(rng);
      c.vm_types.push_back({"t" + std::to_string(i), g + extra(rng), g, std::round(price(rng) * 4) / 4});
    }
    const Demand d{demand_g(rng), demand_c(rng)};
    const double x0 = target(rng);
    ProcurementPlan plan;
    try {
      plan = procure(c, x0, d);
    } catch (const Error&) {
      // Only acceptable when nothing can ever satisfy the demand.
      const bool has_gpu = std::any_of(c.vm_types.begin(), c.vm_types.end(),
                                       [](const VmType& v) { return v.gpu_cards > 0; });
      EXPECT_TRUE(d.gpus > 0 && !has_gpu);
      continue;
    }
    ASSERT_TRUE(plan.satisfies(d));
    const double dist = std::abs(plan.unit_price() - x0);
    const double bound = std::max(2 * x0, plan.unit_price());
    for (const auto& counts : all_multisets(c, bound)) {
      int g = 0, h = 0;
      double p = 0;
      for (std::size_t i = 0; i < counts.size(); ++i) {
        g += counts[i] * c.vm_types[i].gpu_cards;
        h += counts[i] * c.vm_types[i].cpu_headroom();
        p += counts[i] * c.vm_types[i].unit_price;
      }
      if (g >= d.gpus && h >= d.cpus) {
        EXPECT_GE(std::abs(p - x0), dist - 1e-9);
      }
    }
  }
}

TEST(Objective, Arithmetic) {
  EXPECT_DOUBLE_EQ(objective(10, 2, 0.5), 6.0);
  EXPECT_DOUBLE_EQ(objective(10, 2, 0.0), 2.0);
  EXPECT_THROW(objective(1, 1, 1.0), Error);
  EXPECT_NEAR(monetary_cost(4.65, 35.94), 0.0464, 5e-5);
  EXPECT_NEAR(monetary_cost(5.10, 35.94), 0.0509, 5e-5);
}

TEST(Objective, NormalizedDominance) {
  const auto j = normalized_objectives({{10, 5}, {20, 8}, {15, 1}}, 0.5);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_DOUBLE_EQ(j[0], 0.5 * 0 + 0.5 * (4.0 / 7));
  EXPECT_DOUBLE_EQ(j[1], 1.0);
  EXPECT_DOUBLE_EQ(j[2], 0.25);
  EXPECT_EQ(normalized_objectives({{3, 3}, {3, 3}}, 0.2), (std::vector<double>{0, 0}));
}

TEST(CatalogJson, RoundTripAndValidation) {
  const auto c = qcloud();
  EXPECT_EQ(c.currency, "CNY");
  EXPECT_EQ(to_json(catalog_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(catalog_from_json(nlohmann::json::parse(R"([{"name":"x","cpu_cores":0,"unit_price":1}])")),
               Error);
  EXPECT_THROW(catalog_from_json(nlohmann::json::parse(R"([{"name":"x","cpu_cores":2,"unit_price":0}])")),
               Error);
}
