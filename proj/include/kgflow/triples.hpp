#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <tuple>

namespace kgflow {

// Subject, predicate and object as local names (see canonical_name).
struct Triple {
  std::string s;
  std::string p;
  std::string o;

  auto operator<=>(const Triple&) const = default;
};

using TripleSet = std::set<Triple>;

// Surface form -> local name: trimmed, inner whitespace runs become '_'.
std::string canonical_name(std::string_view surface);

// Local name -> IRI path segment. Unreserved characters and '_' pass
// through, everything else is percent-encoded byte by byte.
std::string encode_iri_segment(std::string_view name);
std::string decode_iri_segment(std::string_view segment);

struct Ontology;

// One `<s> <p> <o> .` line per triple, sorted. Objects whose predicate is an
// ontology attribute are written as plain literals.
std::string to_ntriples(const TripleSet& triples, std::string_view ns, const Ontology* ontology = nullptr);
// Inverse of to_ntriples. IRIs outside `ns` keep their full text.
TripleSet parse_ntriples(std::string_view text, std::string_view ns);

struct EvalCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct Prf {
  EvalCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Exact match on (s, p, o). Zero denominators give 0.
Prf eval_prf(const TripleSet& predicted, const TripleSet& gold);
Prf prf_from_counts(const EvalCounts& counts);

} // namespace kgflow
