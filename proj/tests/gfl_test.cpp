#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "kgflow/gfl.hpp"
#include "kgflow/json_io.hpp"
#include "support/isomorphism.hpp"
#include "support/random_dag.hpp"

using namespace kgflow;

namespace {

std::set<EdgeKey> edge_set(const Flowline& f) {
  std::set<EdgeKey> out;
  for (const auto& e : f.edges) out.insert({e.from, e.to});
  return out;
}

std::size_t count_lines_with(const std::string& text, const std::string& needle) {
  std::size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

void expect_error(const std::string& text, const std::string& fragment, std::size_t line) {
  try {
    gfl::parse(text);
    ADD_FAILURE() << "expected a parse error containing '" << fragment << "'";
  } catch (const gfl::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    EXPECT_EQ(e.span().line, line) << e.what();
    EXPECT_GE(e.span().column, 1u);
  }
}

Registry random_registry() {
  Registry r = Registry::builtin();
  r.add({"op", TaskKind::op, OperatorFamily::controller, {}, {}});
  r.add({"ce_model", TaskKind::model_ce, std::nullopt, {}, {}});
  r.add({"cc_model", TaskKind::model_cc, std::nullopt, {}, {}});
  return r;
}

} // namespace

TEST(GflParse, ExampleMatchesExpectedGraph) {
  const auto f = gfl::parse(read_text_file(KGFLOW_DATA_DIR "/running_example.gfl"));
  std::set<std::string> ids;
  for (const auto& v : f.vertices) ids.insert(v.id);
  const std::set<std::string> expected_ids{"data", "BertNER", "filter[f_bert]", "filter[f_lstm]",
                                           "permutate[p1]", "permutate[p2]", "BERTRE", "LSTMRE",
                                           "merge[re]", "triple"};
  EXPECT_EQ(ids, expected_ids);
  const std::set<EdgeKey> expected_edges{
      {"data", "BertNER"},           {"BertNER", "filter[f_bert]"},   {"BertNER", "filter[f_lstm]"},
      {"filter[f_bert]", "permutate[p1]"}, {"filter[f_lstm]", "permutate[p2]"},
      {"permutate[p1]", "BERTRE"},   {"permutate[p2]", "LSTMRE"},     {"BERTRE", "merge[re]"},
      {"LSTMRE", "merge[re]"},       {"merge[re]", "triple"}};
  EXPECT_EQ(edge_set(f), expected_edges);
  EXPECT_EQ(f.entry, "data");
  EXPECT_EQ(f.exit, "triple");
  EXPECT_EQ(f.find("BertNER")->kind, TaskKind::model_ce);
  EXPECT_EQ(f.find("BERTRE")->kind, TaskKind::model_cc);
  EXPECT_EQ(f.find("filter[f_bert]")->config.at("predicate"), "ent_t in filtered_ent");
  EXPECT_TRUE(f.bindings.contains("filtered_ent"));
  // Output bindings ride on the pipes leaving the call.
  for (const auto& e : f.edges) {
    if (e.from == "BertNER") {
      EXPECT_EQ(e.columns, (std::vector<std::string>{"ent", "ent_t"}));
    }
  }
}

TEST(GflParse, MinimalPipeline) {
  const auto f = gfl::parse(":data\n    | opt.end:");
  ASSERT_EQ(f.vertices.size(), 2u);
  EXPECT_EQ(edge_set(f), (std::set<EdgeKey>{{"data", "end"}}));
}

TEST(GflParse, LabelIdentityMergesRepeatedCalls) {
  const auto f = gfl::parse(read_text_file(KGFLOW_TEST_DATA_DIR "/gfl/vote.gfl"));
  EXPECT_EQ(f.predecessors("vote[v]").size(), 3u);
  EXPECT_EQ(std::count_if(f.vertices.begin(), f.vertices.end(),
                          [](const TaskNode& v) { return v.function == "vote"; }),
            1);
}

TEST(GflParse, Errors) {
  expect_error(":data\n    | opt.merge[re]\n        | model.merge[re]\n    | opt.end:\n", "label conflict", 3);
  expect_error(":data\n   | opt.triple:\n", "multiple of 4", 2);
  expect_error(":data\n\t| opt.triple:\n", "tabs", 2);
  expect_error(":data\n    | opt.filter[f](ent_t in xs\n        | opt.triple:\n", "unbalanced", 2);
  expect_error(":data\n    | opt.filter[f\n", "unbalanced", 2);
  expect_error(":data\n    | foo.bar:\n", "unknown namespace", 2);
  expect_error(":data\n    | opt.triple\n", "missing outlet", 1);
  expect_error(":data\n    | opt.filter(x in ys)\n        | opt.end:\nys := []\n", "not defined before use", 2);
  expect_error(":data\n    | opt.mapper[a]\n        | opt.mapper[b]\n            | opt.mapper[a]\n    | opt.end:\n",
               "cycle", 1);
  expect_error(":data\n    | opt.nosuchop:\n", "unknown-function", 2);
  expect_error(":data\n    | opt.triple:\n", "type-incompatible", 2);
  expect_error(":data\n        | opt.end\n    | opt.end:\n", "inconsistent indentation", 3);
}

TEST(GflFormat, TrivialFlowline) {
  const auto f = gfl::parse(":data\n    | opt.end:\n");
  EXPECT_EQ(gfl::format(f), ":data\n    | opt.end:\n");
}

TEST(GflFormat, ExampleReparsesIsomorphic) {
  const auto f = gfl::parse(read_text_file(KGFLOW_DATA_DIR "/running_example.gfl"));
  const auto text = gfl::format(f);
  const auto g = gfl::parse(text);
  EXPECT_TRUE(testsupport::isomorphic(f, g)) << text;
  EXPECT_EQ(gfl::format(g), text);
}

TEST(GflFormat, ExampleJsonFlowlineRoundTrips) {
  const auto f = load_flowline(KGFLOW_DATA_DIR "/running_example.json");
  const auto text = gfl::format(f);
  const auto g = gfl::parse(text);
  EXPECT_TRUE(testsupport::isomorphic(f, g)) << text;
}

TEST(GflFormat, CorpusRoundTripAndIdempotence) {
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(KGFLOW_TEST_DATA_DIR "/gfl")) {
    SCOPED_TRACE(entry.path().string());
    const auto f = gfl::parse(read_text_file(entry.path()));
    const auto once = gfl::format(f);
    const auto g = gfl::parse(once);
    EXPECT_TRUE(testsupport::isomorphic(f, g)) << once;
    EXPECT_EQ(gfl::format(g), once);
    ++files;
  }
  EXPECT_GE(files, 8);
}

TEST(GflFormat, RandomFlowlinesRoundTrip) {
  const Registry registry = random_registry();
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> size(1, 10);
  for (int trial = 0; trial < 60; ++trial) {
    const auto f = testsupport::random_dag(rng, size(rng));
    const auto text = gfl::format(f);
    const auto g = gfl::parse(text, registry);
    ASSERT_TRUE(testsupport::isomorphic(f, g)) << text;
    EXPECT_EQ(gfl::format(g), text);
  }
}

TEST(GflDot, CountsNodesAndEdges) {
  const auto trivial = gfl::emit_dot(gfl::parse(":data\n    | opt.end:\n"));
  EXPECT_EQ(count_lines_with(trivial, "[shape="), 2u);
  EXPECT_EQ(count_lines_with(trivial, " -> "), 1u);
  EXPECT_NE(trivial.find("  \"end\" [shape=box];\n"), std::string::npos);

  const auto source = read_text_file(KGFLOW_DATA_DIR "/running_example.gfl");
  const auto dot = gfl::emit_dot(gfl::parse(source));
  EXPECT_EQ(count_lines_with(dot, "[shape="), 10u);
  // Pipes in the source, minus the two top-level re-anchoring lines and the
  // duplicate pipe into merge[re] that shares the BERTRE edge.
  EXPECT_EQ(count_lines_with(source, "| "), 12u);
  EXPECT_EQ(count_lines_with(dot, " -> "), 10u);
}
