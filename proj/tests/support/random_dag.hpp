#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <string>

#include "kgflow/flowline.hpp"

namespace kgflow::testsupport {

// Random single-entry/single-exit DAG with `n` vertices. Vertex 0 feeds every
// source and every sink feeds vertex n-1. A fraction of vertices are models.
inline Flowline random_dag(std::mt19937& rng, int n, double edge_prob = 0.3,
                           double model_prob = 0.3) {
  Flowline f;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    TaskNode v;
    v.id = "v" + std::to_string(i);
    v.label = v.id;
    const bool model = i != 0 && i != n - 1 && u(rng) < model_prob;
    v.kind = model ? (u(rng) < 0.5 ? TaskKind::model_ce : TaskKind::model_cc) : TaskKind::op;
    v.function = !model ? "op" : v.kind == TaskKind::model_ce ? "ce_model" : "cc_model";
    if (!model) v.family = OperatorFamily::controller;
    f.vertices.push_back(v);
  }
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  for (int i = 1; i < n - 1; ++i) {
    for (int j = i + 1; j < n - 1; ++j) {
      if (u(rng) < edge_prob) {
        f.edges.push_back({f.vertices[i].id, f.vertices[j].id, {}});
        ++outdeg[i];
        ++indeg[j];
      }
    }
  }
  if (n == 1) {
    f.entry = f.exit = f.vertices[0].id;
    return f;
  }
  for (int i = 1; i < n - 1; ++i) {
    if (indeg[i] == 0) f.edges.push_back({f.vertices[0].id, f.vertices[i].id, {}});
    if (outdeg[i] == 0) f.edges.push_back({f.vertices[i].id, f.vertices[n - 1].id, {}});
  }
  if (n == 2) f.edges.push_back({f.vertices[0].id, f.vertices[1].id, {}});
  f.entry = f.vertices.front().id;
  f.exit = f.vertices.back().id;
  return f;
}

inline TaskProfile random_profile(std::mt19937& rng, const Flowline& f) {
  TaskProfile p;
  std::uniform_real_distribution<double> w(0.0, 5.0);
  std::uniform_real_distribution<double> bytes(0.0, 1e5);
  for (const auto& v : f.vertices) p.vertex_weights[v.id] = w(rng);
  for (const auto& e : f.edges) p.edge_payloads[{e.from, e.to}] = bytes(rng);
  return p;
}

// Brute-force longest path: enumerate every entry->exit path explicitly.
inline double longest_path_by_enumeration(const ComputationGraph& g) {
  double best = -1.0;
  std::function<void(const std::string&, double)> dfs = [&](const std::string& v, double acc) {
    acc += g.profile.vertex_weights.at(v);
    if (v == g.base.exit) {
      best = std::max(best, acc);
      return;
    }
    for (const auto& e : g.base.edges) {
      if (e.from != v) continue;
      auto it = g.edge_weights.find({e.from, e.to});
      dfs(e.to, acc + (it == g.edge_weights.end() ? 0.0 : it->second));
    }
  };
  dfs(g.base.entry, 0.0);
  return best;
}

} // namespace kgflow::testsupport
