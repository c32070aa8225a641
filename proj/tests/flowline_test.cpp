#include <random>

#include <gtest/gtest.h>

#include "kgflow/error.hpp"
#include "kgflow/flowline.hpp"
#include "kgflow/json_io.hpp"
#include "kgflow/registry.hpp"
#include "support/random_dag.hpp"

using namespace kgflow;

namespace {

TaskNode op(const std::string& id) {
  TaskNode v;
  v.id = v.label = v.function = id;
  v.family = OperatorFamily::mapper;
  return v;
}

Flowline chain(std::initializer_list<std::string> ids) {
  Flowline f;
  std::string prev;
  for (const auto& id : ids) {
    f.vertices.push_back(op(id));
    if (!prev.empty()) f.edges.push_back({prev, id, {}});
    prev = id;
  }
  f.entry = f.vertices.front().id;
  f.exit = f.vertices.back().id;
  return f;
}

Flowline diamond() {
  Flowline f;
  for (auto id : {"entry", "a", "b", "exit"}) f.vertices.push_back(op(id));
  f.edges = {{"entry", "a", {}}, {"entry", "b", {}}, {"a", "exit", {}}, {"b", "exit", {}}};
  f.entry = "entry";
  f.exit = "exit";
  return f;
}

} // namespace

TEST(Validate, SingleVertexIsBothEntryAndExit) {
  auto f = chain({"only"});
  EXPECT_TRUE(validate(f).ok());
}

TEST(Validate, TwoCycleIsReported) {
  Flowline f;
  f.vertices = {op("a"), op("b")};
  f.edges = {{"a", "b", {}}, {"b", "a", {}}};
  const auto report = validate(f);
  EXPECT_FALSE(report.ok());
  EXPECT_TRUE(report.has_error("cycle"));
}

TEST(Validate, StructuralViolations) {
  Flowline f = diamond();
  f.exit.clear();
  f.vertices.push_back(op("stray"));
  auto report = validate(f);
  EXPECT_TRUE(report.has_error("multiple-entries"));
  EXPECT_TRUE(report.has_error("multiple-exits"));

  Flowline g = chain({"a", "b"});
  g.edges.push_back({"b", "ghost", {}});
  EXPECT_TRUE(validate(g).has_error("dangling-edge"));

  Flowline h = chain({"a", "b"});
  h.vertices.push_back(op("a"));
  EXPECT_TRUE(validate(h).has_error("duplicate-id"));
}

TEST(Validate, ExampleFixtureIsValidAgainstRegistry) {
  const auto f = load_flowline(KGFLOW_DATA_DIR "/running_example.json");
  const auto report = validate(f, &Registry::builtin());
  EXPECT_TRUE(report.ok()) << report.summary();
  EXPECT_EQ(f.vertices.size(), 9u);
}

TEST(Validate, TypeIncompatiblePipe) {
  // triple needs entity_pair and relation_category; data only yields samples.
  Flowline f;
  TaskNode data = op("data");
  data.family = OperatorFamily::controller;
  TaskNode triple = op("triple");
  triple.family = OperatorFamily::constructor;
  f.vertices = {data, triple};
  f.edges = {{"data", "triple", {}}};
  f.entry = "data";
  f.exit = "triple";
  const auto report = validate(f, &Registry::builtin());
  EXPECT_TRUE(report.has_error("type-incompatible")) << report.summary();
}

TEST(Validate, ZeroWeightModelIsWarning) {
  Flowline f = chain({"a"});
  f.vertices[0].kind = TaskKind::model_ce;
  f.vertices[0].family.reset();
  TaskProfile p;
  p.vertex_weights["a"] = 0.0;
  const auto report = check_profile(f, p);
  EXPECT_TRUE(report.ok());
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_EQ(report.warnings[0].code, "zero-weight-model");
}

TEST(Makespan, SingleVertex) {
  auto f = chain({"v"});
  TaskProfile p;
  p.vertex_weights["v"] = 3.0;
  EXPECT_DOUBLE_EQ(makespan(colocated(f, p)), 3.0);
}

TEST(Makespan, DiamondTakesHeavierBranch) {
  auto f = diamond();
  TaskProfile p;
  p.vertex_weights = {{"entry", 1}, {"a", 2}, {"b", 5}, {"exit", 1}};
  EXPECT_DOUBLE_EQ(makespan(colocated(f, p)), 7.0);
}

TEST(Makespan, SplitChainMatchesPathEnumeration) {
  auto f = chain({"v1", "v2"});
  TaskProfile p;
  p.vertex_weights = {{"v1", 2}, {"v2", 3}};
  p.edge_payloads[{"v1", "v2"}] = 4000;
  const auto g = apply_partition(f, p, {{"v1", 0}, {"v2", 1}}, {0.1, 10000});
  EXPECT_DOUBLE_EQ(g.edge_weights.at({"v1", "v2"}), 0.5);
  // Oracle value computed by enumerating the only path: 2 + 0.5 + 3.
  EXPECT_DOUBLE_EQ(testsupport::longest_path_by_enumeration(g), 5.5);
  EXPECT_DOUBLE_EQ(makespan(g), 5.5);
  EXPECT_DOUBLE_EQ(partitioned_time(g, 400, 200), 11.0);
}

TEST(Makespan, InvalidGraphThrows) {
  Flowline f;
  f.vertices = {op("a"), op("b")};
  f.edges = {{"a", "b", {}}, {"b", "a", {}}};
  TaskProfile p;
  p.vertex_weights = {{"a", 1}, {"b", 1}};
  EXPECT_THROW(makespan(colocated(f, p)), Error);
}

TEST(IdealTime, Examples) {
  auto f = chain({"v"});
  TaskProfile p;
  p.vertex_weights["v"] = 4.65;
  EXPECT_NEAR(ideal_time(f, p, 8000, 200), 186.0, 1e-9);
  EXPECT_DOUBLE_EQ(ideal_time(f, p, 200, 200), 4.65);
  EXPECT_DOUBLE_EQ(ideal_time(f, p, 0, 200), 0.0);
  EXPECT_THROW(ideal_time(f, p, 10, 0), Error);
}

TEST(ApplyPartition, CoLocationAndErrors) {
  auto f = diamond();
  TaskProfile p;
  p.vertex_weights = {{"entry", 1}, {"a", 2}, {"b", 5}, {"exit", 1}};
  for (const auto& e : f.edges) p.edge_payloads[{e.from, e.to}] = 1000;
  const std::map<std::string, int> all_one{{"entry", 0}, {"a", 0}, {"b", 0}, {"exit", 0}};
  const auto g = apply_partition(f, p, all_one, {0.1, 1000});
  for (const auto& [k, w] : g.edge_weights) EXPECT_EQ(w, 0.0);
  EXPECT_DOUBLE_EQ(partitioned_time(g, 1000, 200), ideal_time(f, p, 1000, 200));
  EXPECT_THROW(apply_partition(f, p, all_one, {0.1, 0.0}), Error);
  EXPECT_THROW(apply_partition(f, p, {{"entry", 0}}, {0.1, 1.0}), Error);
}

TEST(MakespanProperty, RecursionEqualsPathEnumeration) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> size(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng));
    ASSERT_TRUE(validate(f).ok()) << validate(f).summary();
    const auto p = testsupport::random_profile(rng, f);
    std::map<std::string, int> part;
    std::uniform_int_distribution<int> vm(0, 2);
    for (const auto& v : f.vertices) part[v.id] = vm(rng);
    const auto g = apply_partition(f, p, part, {0.05, 1e5});
    EXPECT_DOUBLE_EQ(makespan(g), testsupport::longest_path_by_enumeration(g));
  }
}

TEST(MakespanProperty, MonotoneInWeights) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testsupport::random_dag(rng, 8);
    auto p = testsupport::random_profile(rng, f);
    const double before = makespan(colocated(f, p));
    const auto& v = f.vertices[trial % f.vertices.size()];
    p.vertex_weights[v.id] += 0.5;
    EXPECT_GE(makespan(colocated(f, p)), before);
  }
}

TEST(MakespanProperty, RefinementAndCutsNeverHelp) {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> size(2, 10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng));
    const auto p = testsupport::random_profile(rng, f);
    const NetworkParams net{0.05, 2e4};
    std::map<std::string, int> coarse, fine;
    std::uniform_int_distribution<int> coin(0, 1);
    for (const auto& v : f.vertices) {
      coarse[v.id] = coin(rng);
      // Strict refinement: split partition 0 further.
      fine[v.id] = coarse[v.id] == 0 ? coin(rng) * 2 : 1;
    }
    const double m_coarse = makespan(apply_partition(f, p, coarse, net));
    const double m_fine = makespan(apply_partition(f, p, fine, net));
    EXPECT_GE(m_fine, m_coarse - 1e-12);
    EXPECT_GE(m_coarse, makespan(colocated(f, p)) - 1e-12);
  }
}

TEST(FlowlineJson, RoundTripPreservesStructure) {
  const auto f = load_flowline(KGFLOW_DATA_DIR "/running_example.json");
  const auto g = flowline_from_json(to_json(f));
  EXPECT_EQ(to_json(f), to_json(g));
}
