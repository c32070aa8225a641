#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace kgflow {

struct RelationDef {
  std::string name;
  std::string domain;
  std::string range;
  auto operator<=>(const RelationDef&) const = default;
};

struct AttributeDef {
  std::string name;
  std::string domain;
  std::string literal_type;
  auto operator<=>(const AttributeDef&) const = default;
};

// Flat ontology. Relation and attribute domains (and relation ranges) must be
// classes.
struct Ontology {
  std::set<std::string> classes;
  std::set<RelationDef> relations;
  std::set<AttributeDef> attributes;

  [[nodiscard]] bool has_relation(std::string_view name) const;
  [[nodiscard]] bool has_attribute(std::string_view name) const;
  [[nodiscard]] std::set<std::string> relation_names() const;
  [[nodiscard]] std::set<std::string> attribute_names() const;
  [[nodiscard]] bool empty() const { return classes.empty() && relations.empty() && attributes.empty(); }
  // Throws kgflow::Error naming the first dangling domain or range.
  void check() const;
};

// {"classes": [...], "relations": [{"name", "domain", "range"}],
//  "attributes": [{"name", "domain", "type"}]}
nlohmann::json to_json(const Ontology& ontology);
Ontology ontology_from_json(const nlohmann::json& doc);
Ontology load_ontology(const std::filesystem::path& path);

enum class MergeOp { filter, mapping, merging, ensemble };

struct MergeStep {
  MergeOp op = MergeOp::merging;
  std::optional<std::size_t> source{};  // filter/mapping target; all when unset
  std::vector<std::string> names{};   // filter
  std::map<std::string, std::string> table{};  // mapping: old -> new
};

struct MergeReport {
  std::set<std::string> overlapping_classes;
  std::set<std::string> overlapping_relations;
  std::set<std::string> overlapping_attributes;

  [[nodiscard]] bool empty() const {
    return overlapping_classes.empty() && overlapping_relations.empty() && overlapping_attributes.empty();
  }
};

struct MergeResult {
  Ontology ontology;
  MergeReport report;
};

// Runs the plan over the sources in order. filter and mapping act on one
// source (or each); merging and ensemble fold every source into one. Sources
// still separate at the end are folded with merging. Classes are shared
// vocabulary and never count as a merging conflict.
MergeResult merge_ontologies(std::vector<Ontology> sources, const std::vector<MergeStep>& plan);

nlohmann::json to_json(const MergeReport& report);
std::vector<MergeStep> merge_plan_from_json(const nlohmann::json& doc);

} // namespace kgflow
