#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgflow/corpus.hpp"
#include "kgflow/endpoint.hpp"
#include "kgflow/flowline.hpp"
#include "kgflow/ontology.hpp"
#include "kgflow/registry.hpp"
#include "kgflow/triples.hpp"

namespace kgflow {

// One row of a data slice. `row_id` is the id of the source sample, so every
// row derived from a sample shares it.
struct Record {
  std::string row_id;
  nlohmann::json columns = nlohmann::json::object();
};

struct DataSlice {
  std::size_t index = 0;
  std::vector<Record> records;
  std::set<std::string> projected_columns;  // empty: every column
};

struct RowIssue {
  std::string task;
  std::string row_id;
  std::string message;
};

struct OperatorContext {
  const Flowline* flowline = nullptr;  // bindings for filter predicates
  const std::map<std::string, std::string>* aliases = nullptr;
  const Ontology* ontology = nullptr;  // label check for score_ensemble
  std::vector<RowIssue>* issues = nullptr;
};

// Single-input operator semantics on an already projected slice. Rows that
// fail are dropped and logged unless the node sets "on_error": "fail".
DataSlice apply_operator(const TaskNode& node, const DataSlice& input, const OperatorContext& ctx = {});
// Integrators (merge, vote, score_ensemble, chunk_union) over one slice per
// predecessor.
DataSlice apply_integrator(const TaskNode& node, const std::vector<DataSlice>& inputs,
                           const OperatorContext& ctx = {});

// labels[j][i]: classifier j on row i. Ties go to the tied label seen at the
// lowest classifier index.
std::vector<std::string> ensemble_vote(const std::vector<std::vector<std::string>>& labels);

using ScoreMap = std::map<std::string, double>;

struct ScoreEnsembleOptions {
  std::vector<double> weights;  // default 1/m each
  double threshold = 0.5;
  bool strict = false;  // accept only if every classifier scores the winner above threshold
  std::optional<std::set<std::string>> allowed_labels{};
};

// scores[j][i]: classifier j's label -> score map on row i. nullopt = reject.
// The winner is accepted when some classifier scores it above the threshold.
std::vector<std::optional<std::string>> ensemble_score(const std::vector<std::vector<ScoreMap>>& scores,
                                                       const ScoreEnsembleOptions& options = {});

// Set union, deduplicated on (surface, type, start, end), first-seen order.
std::vector<Chunk> chunk_ensemble(const std::vector<std::vector<Chunk>>& sets);

// Endpoints keyed by task id, or by function name for every task using it.
using EndpointMap = std::map<std::string, EndpointPtr>;

struct RunOptions {
  std::size_t slice_rows = 200;
  const Registry* registry = &Registry::builtin();
};

struct TaskStats {
  double seconds = 0.0;
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
};

struct EdgeStats {
  std::size_t rows = 0;
  std::size_t bytes = 0;  // serialised projected rows
};

struct RunReport {
  std::size_t records = 0;
  std::size_t slices = 0;
  std::map<std::string, TaskStats> tasks;
  std::map<EdgeKey, EdgeStats> edges;
  std::vector<RowIssue> dropped;
};

struct RunResult {
  TripleSet triples;
  RunReport report;
};

// Slices the corpus and pushes each slice through the tasks in topological
// order, one slice at a time. Triples come from every triple constructor.
RunResult run_flowline(const Flowline& flowline, const Ontology& ontology, const Corpus& corpus,
                       const EndpointMap& endpoints, const RunOptions& options = {});

nlohmann::json to_json(const RunReport& report);

// Mean seconds and bytes per slice; zero when nothing ran.
TaskProfile profile_from_report(const Flowline& flowline, const RunReport& report);

// Merges {task id: {config...}} into the matching vertices' configs.
void apply_config_overlay(Flowline& flowline, const nlohmann::json& overlay);

} // namespace kgflow
