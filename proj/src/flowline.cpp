#include "kgflow/flowline.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "kgflow/error.hpp"
#include "kgflow/predicate.hpp"
#include "kgflow/registry.hpp"

namespace kgflow {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::model_cc: return "model-CC";
    case TaskKind::model_ce: return "model-CE";
    case TaskKind::op: return "operator";
  }
  return "operator";
}

std::string_view to_string(OperatorFamily family) {
  switch (family) {
    case OperatorFamily::filter: return "filter";
    case OperatorFamily::mapper: return "mapper";
    case OperatorFamily::integrator: return "integrator";
    case OperatorFamily::constructor: return "constructor";
    case OperatorFamily::controller: return "controller";
  }
  return "controller";
}

std::string_view to_string(ResourceClass rc) {
  return rc == ResourceClass::gpu ? "GPU-intensive" : "CPU-only";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "model-CC" || text == "cc") return TaskKind::model_cc;
  if (text == "model-CE" || text == "ce") return TaskKind::model_ce;
  if (text == "operator" || text == "op") return TaskKind::op;
  throw Error("unknown task kind '" + std::string(text) + "'");
}

OperatorFamily parse_operator_family(std::string_view text) {
  for (auto f : {OperatorFamily::filter, OperatorFamily::mapper, OperatorFamily::integrator,
                 OperatorFamily::constructor, OperatorFamily::controller}) {
    if (to_string(f) == text) return f;
  }
  throw Error("unknown operator family '" + std::string(text) + "'");
}

const TaskNode* Flowline::find(std::string_view id) const {
  auto it = std::find_if(vertices.begin(), vertices.end(), [&](const TaskNode& v) { return v.id == id; });
  return it == vertices.end() ? nullptr : &*it;
}

std::optional<std::size_t> Flowline::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Flowline::predecessors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& e : edges) {
    if (e.to == id && std::find(out.begin(), out.end(), e.from) == out.end()) out.push_back(e.from);
  }
  return out;
}

std::vector<std::string> Flowline::successors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& e : edges) {
    if (e.from == id && std::find(out.begin(), out.end(), e.to) == out.end()) out.push_back(e.to);
  }
  return out;
}

std::vector<std::string> Flowline::neighbors(std::string_view id) const {
  auto out = predecessors(id);
  for (auto& s : successors(id)) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  }
  return out;
}

std::optional<std::vector<std::string>> Flowline::topological_order() const {
  const std::size_t n = vertices.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& e : edges) {
    auto a = index_of(e.from);
    auto b = index_of(e.to);
    if (!a || !b) continue;
    succ[*a].push_back(*b);
    ++indeg[*b];
  }
  // Ready set ordered by vertex index keeps the order deterministic.
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.insert(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(vertices[v].id);
    for (std::size_t s : succ[v]) {
      if (--indeg[s] == 0) ready.insert(s);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& e : errors) os << "error[" << e.code << "]: " << e.message << '\n';
  for (const auto& w : warnings) os << "warning[" << w.code << "]: " << w.message << '\n';
  return os.str();
}

namespace {

void check_columns(const Flowline& f, const Registry& registry, ValidationReport& report,
                   const std::vector<std::string>& order) {
  std::map<std::string, std::string> aliases;
  try {
    aliases = column_aliases(f, registry);
  } catch (const Error& e) {
    report.errors.push_back({"output-binding", e.what()});
    return;
  }
  std::map<std::string, std::set<std::string>> produced;
  for (const auto& id : order) {
    const TaskNode& v = *f.find(id);
    std::set<std::string> available;
    if (id == f.entry) available.insert(std::string(col::sample));
    for (const auto& p : f.predecessors(id)) {
      const auto& up = produced[p];
      available.insert(up.begin(), up.end());
    }
    std::set<std::string> needed;
    try {
      needed = input_columns(v, registry, aliases);
    } catch (const predicate::SyntaxError& e) {
      report.errors.push_back({"bad-predicate", "task '" + id + "': " + e.what(), id});
    }
    std::vector<std::string> missing;
    for (const auto& c : needed) {
      if (!available.contains(c)) missing.push_back(c);
    }
    if (!missing.empty()) {
      std::string msg = "pipe into '" + id + "' lacks column(s)";
      for (const auto& m : missing) msg += " " + m;
      report.errors.push_back({"type-incompatible", msg, id});
    }
    if (const TaskSpec* spec = registry.find(v.function)) {
      available.insert(spec->outputs.begin(), spec->outputs.end());
    }
    produced[id] = std::move(available);
  }
}

void check_registry(const Flowline& f, const Registry& registry, ValidationReport& report) {
  for (const auto& v : f.vertices) {
    const TaskSpec* spec = registry.find(v.function);
    if (spec == nullptr) {
      report.errors.push_back({"unknown-function", "task '" + v.id + "' uses unknown function '" +
                                                       v.function + "'", v.id});
      continue;
    }
    if (spec->kind != v.kind) {
      report.errors.push_back({"kind-mismatch", "task '" + v.id + "' is declared " +
                                                    std::string(to_string(v.kind)) + " but '" +
                                                    v.function + "' is " +
                                                    std::string(to_string(spec->kind)), v.id});
    }
    if (v.config.contains("predicate")) {
      try {
        auto expr = predicate::Expr::parse(v.config.at("predicate").get<std::string>());
        for (const auto& name : expr.container_identifiers()) {
          if (!f.bindings.contains(name)) {
            report.errors.push_back({"unknown-binding", "task '" + v.id + "' references undefined binding '" +
                                                            name + "'", v.id});
          }
        }
      } catch (const predicate::SyntaxError& e) {
        report.errors.push_back({"bad-predicate", "task '" + v.id + "': " + e.what(), v.id});
      }
    }
  }
}

} // namespace

ValidationReport validate(const Flowline& f, const Registry* registry) {
  ValidationReport report;
  if (f.vertices.empty()) {
    report.errors.push_back({"empty", "flowline has no vertices"});
    return report;
  }
  std::set<std::string> ids;
  for (const auto& v : f.vertices) {
    if (!ids.insert(v.id).second) {
      report.errors.push_back({"duplicate-id", "duplicate task id '" + v.id + "'", v.id});
    }
    // An unregistered function is reported as such by the registry check.
    const bool unknown = registry != nullptr && registry->find(v.function) == nullptr;
    if (v.kind == TaskKind::op && !v.family && !unknown) {
      report.errors.push_back({"missing-family", "operator '" + v.id + "' has no operator family", v.id});
    }
  }
  std::map<std::string, int> indeg, outdeg;
  for (const auto& id : ids) indeg[id] = outdeg[id] = 0;
  std::set<EdgeKey> seen;
  for (const auto& e : f.edges) {
    if (!ids.contains(e.from) || !ids.contains(e.to)) {
      report.errors.push_back({"dangling-edge", "edge " + e.from + " -> " + e.to + " references a missing vertex"});
      continue;
    }
    if (!seen.insert({e.from, e.to}).second) continue;
    ++outdeg[e.from];
    ++indeg[e.to];
  }
  std::vector<std::string> entries, exits;
  for (const auto& v : f.vertices) {
    if (indeg[v.id] == 0) entries.push_back(v.id);
    if (outdeg[v.id] == 0) exits.push_back(v.id);
  }
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (entries.empty()) report.errors.push_back({"no-entry", "no vertex has in-degree 0"});
  if (entries.size() > 1) report.errors.push_back({"multiple-entries", "several entry vertices: " + join(entries)});
  if (exits.empty()) report.errors.push_back({"no-exit", "no vertex has out-degree 0"});
  if (exits.size() > 1) report.errors.push_back({"multiple-exits", "several exit vertices: " + join(exits)});
  if (entries.size() == 1 && !f.entry.empty() && f.entry != entries.front()) {
    report.errors.push_back({"entry-mismatch", "declared entry '" + f.entry + "' is not the source '" + entries.front() + "'"});
  }
  if (exits.size() == 1 && !f.exit.empty() && f.exit != exits.front()) {
    report.errors.push_back({"exit-mismatch", "declared exit '" + f.exit + "' is not the sink '" + exits.front() + "'"});
  }

  const auto order = f.topological_order();
  if (!order) report.errors.push_back({"cycle", "flowline contains a cycle"});

  if (entries.size() == 1 && exits.size() == 1) {
    // Forward from the entry, backward from the exit.
    auto reach = [&](const std::string& start, bool forward) {
      std::set<std::string> seen_v{start};
      std::deque<std::string> queue{start};
      while (!queue.empty()) {
        auto v = queue.front();
        queue.pop_front();
        for (const auto& n : forward ? f.successors(v) : f.predecessors(v)) {
          if (seen_v.insert(n).second) queue.push_back(n);
        }
      }
      return seen_v;
    };
    const auto fwd = reach(entries.front(), true);
    const auto bwd = reach(exits.front(), false);
    for (const auto& v : f.vertices) {
      if (!fwd.contains(v.id) || !bwd.contains(v.id)) {
        report.errors.push_back({"unreachable", "vertex '" + v.id + "' is not on an entry-to-exit path", v.id});
      }
    }
  }

  if (registry != nullptr) {
    check_registry(f, *registry, report);
    if (order && report.ok()) check_columns(f, *registry, report, *order);
  }
  return report;
}

ValidationReport check_profile(const Flowline& f, const TaskProfile& profile) {
  ValidationReport report;
  for (const auto& v : f.vertices) {
    auto it = profile.vertex_weights.find(v.id);
    if (it == profile.vertex_weights.end()) {
      report.errors.push_back({"missing-weight", "no weight for task '" + v.id + "'"});
    } else if (it->second < 0) {
      report.errors.push_back({"negative-weight", "negative weight for task '" + v.id + "'"});
    } else if (it->second == 0 && v.is_model()) {
      report.warnings.push_back({"zero-weight-model", "model '" + v.id + "' has zero weight"});
    }
  }
  for (const auto& e : f.edges) {
    auto it = profile.edge_payloads.find({e.from, e.to});
    if (it == profile.edge_payloads.end()) {
      report.errors.push_back({"missing-payload", "no payload for edge " + e.from + " -> " + e.to});
    } else if (it->second < 0) {
      report.errors.push_back({"negative-payload", "negative payload for edge " + e.from + " -> " + e.to});
    }
  }
  return report;
}

double makespan(const ComputationGraph& g) {
  const auto report = validate(g.base);
  if (!report.ok()) throw Error("invalid flowline: " + report.errors.front().message);
  const auto order = *g.base.topological_order();
  std::map<std::string, double> finish;
  for (const auto& id : order) {
    auto w = g.profile.vertex_weights.find(id);
    if (w == g.profile.vertex_weights.end()) throw Error("no weight for task '" + id + "'");
    double start = 0.0;
    for (const auto& p : g.base.predecessors(id)) {
      auto ew = g.edge_weights.find({p, id});
      const double edge = ew == g.edge_weights.end() ? 0.0 : ew->second;
      start = std::max(start, finish.at(p) + edge);
    }
    finish[id] = w->second + start;
  }
  return finish.at(g.base.exit.empty() ? order.back() : g.base.exit);
}

ComputationGraph colocated(const Flowline& f, const TaskProfile& profile) {
  ComputationGraph g{f, profile, {}, {}};
  for (const auto& v : f.vertices) g.assignment[v.id] = 0;
  for (const auto& e : f.edges) g.edge_weights[{e.from, e.to}] = 0.0;
  return g;
}

ComputationGraph apply_partition(const Flowline& f, const TaskProfile& profile,
                                 const std::map<std::string, int>& partition,
                                 const NetworkParams& net) {
  if (net.bandwidth_bps <= 0.0) throw Error("zero bandwidth");
  if (net.latency_s < 0.0) throw Error("negative latency");
  ComputationGraph g{f, profile, {}, {}};
  for (const auto& v : f.vertices) {
    auto it = partition.find(v.id);
    if (it == partition.end()) throw Error("unassigned vertex '" + v.id + "'");
    g.assignment[v.id] = it->second;
  }
  for (const auto& e : f.edges) {
    const EdgeKey key{e.from, e.to};
    if (g.assignment.at(e.from) == g.assignment.at(e.to)) {
      g.edge_weights[key] = 0.0;
    } else {
      auto p = profile.edge_payloads.find(key);
      const double bytes = p == profile.edge_payloads.end() ? 0.0 : p->second;
      g.edge_weights[key] = net.latency_s + bytes / net.bandwidth_bps;
    }
  }
  return g;
}

namespace {
double slices(double corpus_rows, double slice_rows) {
  if (slice_rows <= 0.0) throw Error("slice size must be positive");
  if (corpus_rows < 0.0) throw Error("corpus size must be non-negative");
  return corpus_rows / slice_rows;
}
} // namespace

double ideal_time(const Flowline& f, const TaskProfile& profile, double corpus_rows,
                  double slice_rows) {
  const double n = slices(corpus_rows, slice_rows);
  if (n == 0.0) return 0.0;
  return n * makespan(colocated(f, profile));
}

double partitioned_time(const ComputationGraph& g, double corpus_rows, double slice_rows) {
  const double n = slices(corpus_rows, slice_rows);
  if (n == 0.0) return 0.0;
  return n * makespan(g);
}

} // namespace kgflow
