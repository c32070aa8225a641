#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace kgflow {

class Registry;

enum class TaskKind { model_cc, model_ce, op };
enum class OperatorFamily { filter, mapper, integrator, constructor, controller };
enum class ResourceClass { gpu, cpu };

std::string_view to_string(TaskKind kind);
std::string_view to_string(OperatorFamily family);
std::string_view to_string(ResourceClass rc);
TaskKind parse_task_kind(std::string_view text);
OperatorFamily parse_operator_family(std::string_view text);

// A vertex of a flowline: an IE model or a built-in operator.
// Resource class is derived from the kind, so a model is always GPU-intensive
// and an operator always CPU-only.
struct TaskNode {
  std::string id;
  std::string label;
  TaskKind kind = TaskKind::op;
  std::string function;  // registry name, e.g. "filter" or "BertNER"
  std::string instance;  // optional bracket tag used to tell calls apart
  std::optional<OperatorFamily> family;
  nlohmann::json config = nlohmann::json::object();

  [[nodiscard]] bool is_model() const { return kind != TaskKind::op; }
  [[nodiscard]] ResourceClass resource_class() const {
    return is_model() ? ResourceClass::gpu : ResourceClass::cpu;
  }
};

struct Edge {
  std::string from;
  std::string to;
  std::vector<std::string> columns;  // output bindings carried by the pipe
};

using EdgeKey = std::pair<std::string, std::string>;

// Weighted DAG with a single entry and a single exit.
struct Flowline {
  std::vector<TaskNode> vertices;
  std::vector<Edge> edges;
  std::string entry;
  std::string exit;
  std::map<std::string, nlohmann::json> bindings;  // name -> literal list

  [[nodiscard]] const TaskNode* find(std::string_view id) const;
  [[nodiscard]] std::optional<std::size_t> index_of(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> predecessors(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> successors(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> neighbors(std::string_view id) const;

  // Kahn's algorithm, ties broken by vertex order. Empty when cyclic.
  [[nodiscard]] std::optional<std::vector<std::string>> topological_order() const;
};

// Per-slice costs measured or estimated for each task and pipe.
struct TaskProfile {
  std::map<std::string, double> vertex_weights;  // seconds per data slice
  std::map<EdgeKey, double> edge_payloads;       // bytes per data slice
};

struct NetworkParams {
  double latency_s = 0.001;
  double bandwidth_bps = 1.25e8;  // bytes per second
};

struct ComputationGraph {
  Flowline base;
  TaskProfile profile;
  std::map<std::string, int> assignment;     // task id -> vm index
  std::map<EdgeKey, double> edge_weights;    // seconds per data slice
};

struct Violation {
  std::string code;
  std::string message;
  std::string subject{};  // offending task id, when there is one
};

struct ValidationReport {
  std::vector<Violation> errors;
  std::vector<Violation> warnings;

  [[nodiscard]] bool ok() const { return errors.empty(); }
  [[nodiscard]] bool has_error(std::string_view code) const;
  [[nodiscard]] std::string summary() const;
};

// Structural checks always run; when a registry is given, functions must be
// known to it and every operator's input columns must be produced upstream.
ValidationReport validate(const Flowline& flowline, const Registry* registry = nullptr);

// Profile coverage and sign checks. Zero-weight models are warnings.
ValidationReport check_profile(const Flowline& flowline, const TaskProfile& profile);

// Finish time of the exit vertex:
//   FT(entry) = w(entry)
//   FT(v)     = w(v) + max over precursors u of (FT(u) + w(u->v))
double makespan(const ComputationGraph& graph);

// All tasks co-located: every edge weight is zero.
ComputationGraph colocated(const Flowline& flowline, const TaskProfile& profile);

ComputationGraph apply_partition(const Flowline& flowline, const TaskProfile& profile,
                                 const std::map<std::string, int>& partition,
                                 const NetworkParams& net);

// (corpus / slice) * M(G) with every edge weight zero.
double ideal_time(const Flowline& flowline, const TaskProfile& profile, double corpus_rows,
                  double slice_rows);

// (corpus / slice) * M(G') on the partitioned graph.
double partitioned_time(const ComputationGraph& graph, double corpus_rows, double slice_rows);

} // namespace kgflow
