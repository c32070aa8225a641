#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "kgflow/ontology.hpp"
#include "kgflow/triples.hpp"

namespace kgflow {

// Text span [start, end) in bytes of the sample.
struct Chunk {
  std::string surface;
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 1.0;

  [[nodiscard]] auto key() const { return std::tie(surface, type, start, end); }
  bool operator==(const Chunk& other) const { return key() == other.key(); }
  bool operator<(const Chunk& other) const { return key() < other.key(); }
};

nlohmann::json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& doc);

struct GoldRelation {
  std::size_t subject = 0;  // indices into Document::entities
  std::size_t object = 0;
  std::string label;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Chunk> entities;          // gold, optional
  std::vector<GoldRelation> relations;  // gold, optional
};

using Corpus = std::vector<Document>;

// JSON lines: {"id", "text"} plus optional gold "entities" and
// "relations" ({"subject", "object", "label"} over entity indices).
Corpus corpus_from_jsonl(std::string_view text);
std::string to_jsonl(const Corpus& corpus, bool with_gold = true);
Corpus load_corpus(const std::filesystem::path& path);

// Canonical triples of the gold relations.
TripleSet gold_triples(const Corpus& corpus);

// PER/ORG/LOC/DATE classes; Found, WorksFor, LocatedIn relations and the
// FoundedDate attribute.
Ontology synthetic_ontology();

// Template sentences over fixed name pools, fully annotated.
Corpus synthetic_corpus(std::size_t sentences, std::uint64_t seed);

} // namespace kgflow
