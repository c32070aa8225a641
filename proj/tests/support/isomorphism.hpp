#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgflow/flowline.hpp"

namespace kgflow::testsupport {

// Backtracking isomorphism test that ignores ids but requires matching kind
// and function on every vertex, identical edge sets under the mapping and
// matching entry/exit.
inline bool isomorphic(const Flowline& a, const Flowline& b) {
  if (a.vertices.size() != b.vertices.size()) return false;
  std::set<EdgeKey> ea, eb;
  for (const auto& e : a.edges) ea.insert({e.from, e.to});
  for (const auto& e : b.edges) eb.insert({e.from, e.to});
  if (ea.size() != eb.size()) return false;

  const std::size_t n = a.vertices.size();
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  auto compatible = [&](std::size_t i, std::size_t j) {
    const auto& u = a.vertices[i];
    const auto& v = b.vertices[j];
    if (u.kind != v.kind || u.function != v.function) return false;
    if ((u.id == a.entry) != (v.id == b.entry) || (u.id == a.exit) != (v.id == b.exit)) return false;
    return a.predecessors(u.id).size() == b.predecessors(v.id).size() &&
           a.successors(u.id).size() == b.successors(v.id).size();
  };
  auto consistent = [&](std::size_t i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (map[k] < 0) continue;
      const auto& ai = a.vertices[i].id;
      const auto& ak = a.vertices[k].id;
      const auto& bi = b.vertices[map[i]].id;
      const auto& bk = b.vertices[map[k]].id;
      if (ea.contains({ai, ak}) != eb.contains({bi, bk})) return false;
      if (ea.contains({ak, ai}) != eb.contains({bk, bi})) return false;
    }
    return true;
  };
  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == n) return true;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j] || !compatible(i, j)) continue;
      map[i] = static_cast<int>(j);
      used[j] = true;
      if (consistent(i) && self(self, i + 1)) return true;
      used[j] = false;
      map[i] = -1;
    }
    return false;
  };
  return search(search, 0);
}

} // namespace kgflow::testsupport
