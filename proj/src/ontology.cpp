#include "kgflow/ontology.hpp"

#include <algorithm>

#include "kgflow/error.hpp"
#include "kgflow/json_io.hpp"

namespace kgflow {

namespace {

std::string join(const std::set<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

std::set<std::string> intersect(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

bool has_concept(const Ontology& o, const std::string& name) {
  return o.classes.contains(name) || o.has_relation(name) || o.has_attribute(name);
}

void apply_filter(Ontology& o, const std::set<std::string>& names) {
  for (const auto& n : names) o.classes.erase(n);
  std::erase_if(o.relations, [&](const RelationDef& r) {
    return names.contains(r.name) || !o.classes.contains(r.domain) || !o.classes.contains(r.range);
  });
  std::erase_if(o.attributes, [&](const AttributeDef& a) {
    return names.contains(a.name) || !o.classes.contains(a.domain);
  });
}

void apply_mapping(Ontology& o, const std::map<std::string, std::string>& table) {
  for (const auto& [from, to] : table) {
    if (from != to && has_concept(o, from) && has_concept(o, to)) {
      throw Error("mapping '" + from + "' -> '" + to + "' collides with an existing concept");
    }
  }
  auto rename = [&](const std::string& n) {
    auto it = table.find(n);
    return it == table.end() ? n : it->second;
  };
  Ontology out;
  for (const auto& c : o.classes) out.classes.insert(rename(c));
  for (const auto& r : o.relations) out.relations.insert({rename(r.name), rename(r.domain), rename(r.range)});
  for (const auto& a : o.attributes) out.attributes.insert({rename(a.name), rename(a.domain), a.literal_type});
  o = std::move(out);
}

void accumulate_overlaps(MergeReport& report, const Ontology& acc, const Ontology& next) {
  for (const auto& n : intersect(acc.classes, next.classes)) report.overlapping_classes.insert(n);
  for (const auto& n : intersect(acc.relation_names(), next.relation_names())) report.overlapping_relations.insert(n);
  for (const auto& n : intersect(acc.attribute_names(), next.attribute_names())) {
    report.overlapping_attributes.insert(n);
  }
}

Ontology fold(std::vector<Ontology>& sources, MergeOp op, MergeReport& report) {
  Ontology acc;
  MergeReport local;
  for (const auto& o : sources) {
    accumulate_overlaps(local, acc, o);
    acc.classes.insert(o.classes.begin(), o.classes.end());
    acc.relations.insert(o.relations.begin(), o.relations.end());
    acc.attributes.insert(o.attributes.begin(), o.attributes.end());
  }
  if (op == MergeOp::merging) {
    std::set<std::string> clash = local.overlapping_relations;
    clash.insert(local.overlapping_attributes.begin(), local.overlapping_attributes.end());
    if (!clash.empty()) throw Error("cannot merge overlapping concepts: " + join(clash));
  } else {
    report.overlapping_classes.insert(local.overlapping_classes.begin(), local.overlapping_classes.end());
    report.overlapping_relations.insert(local.overlapping_relations.begin(), local.overlapping_relations.end());
    report.overlapping_attributes.insert(local.overlapping_attributes.begin(),
                                         local.overlapping_attributes.end());
  }
  return acc;
}

std::string_view op_name(MergeOp op) {
  switch (op) {
    case MergeOp::filter: return "filter";
    case MergeOp::mapping: return "mapping";
    case MergeOp::merging: return "merging";
    case MergeOp::ensemble: return "ensemble";
  }
  return "?";
}

} // namespace

bool Ontology::has_relation(std::string_view name) const {
  return std::any_of(relations.begin(), relations.end(), [&](const RelationDef& r) { return r.name == name; });
}

bool Ontology::has_attribute(std::string_view name) const {
  return std::any_of(attributes.begin(), attributes.end(), [&](const AttributeDef& a) { return a.name == name; });
}

std::set<std::string> Ontology::relation_names() const {
  std::set<std::string> out;
  for (const auto& r : relations) out.insert(r.name);
  return out;
}

std::set<std::string> Ontology::attribute_names() const {
  std::set<std::string> out;
  for (const auto& a : attributes) out.insert(a.name);
  return out;
}

void Ontology::check() const {
  for (const auto& r : relations) {
    for (const auto& end : {r.domain, r.range}) {
      if (!classes.contains(end)) throw Error("relation '" + r.name + "' references unknown class '" + end + "'");
    }
  }
  for (const auto& a : attributes) {
    if (!classes.contains(a.domain)) {
      throw Error("attribute '" + a.name + "' references unknown class '" + a.domain + "'");
    }
  }
}

nlohmann::json to_json(const Ontology& o) {
  nlohmann::json doc;
  doc["classes"] = o.classes;
  doc["relations"] = nlohmann::json::array();
  for (const auto& r : o.relations) doc["relations"].push_back({{"name", r.name}, {"domain", r.domain}, {"range", r.range}});
  doc["attributes"] = nlohmann::json::array();
  for (const auto& a : o.attributes) {
    doc["attributes"].push_back({{"name", a.name}, {"domain", a.domain}, {"type", a.literal_type}});
  }
  return doc;
}

Ontology ontology_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("ontology must be a JSON object");
  Ontology o;
  try {
    o.classes = doc.value("classes", std::set<std::string>{});
    for (const auto& r : doc.value("relations", nlohmann::json::array())) {
      o.relations.insert({r.at("name"), r.at("domain"), r.at("range")});
    }
    for (const auto& a : doc.value("attributes", nlohmann::json::array())) {
      o.attributes.insert({a.at("name"), a.at("domain"), a.value("type", "string")});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed ontology: ") + e.what());
  }
  o.check();
  return o;
}

Ontology load_ontology(const std::filesystem::path& path) { return ontology_from_json(read_json_file(path)); }

MergeResult merge_ontologies(std::vector<Ontology> sources, const std::vector<MergeStep>& plan) {
  MergeResult result;
  for (const auto& step : plan) {
    if (step.op == MergeOp::merging || step.op == MergeOp::ensemble) {
      Ontology merged = fold(sources, step.op, result.report);
      sources = {std::move(merged)};
      continue;
    }
    if (step.source && *step.source >= sources.size()) {
      throw Error(std::string(op_name(step.op)) + " step targets source " + std::to_string(*step.source) +
                  " but only " + std::to_string(sources.size()) + " remain");
    }
    std::vector<Ontology*> targets;
    if (step.source) {
      targets.push_back(&sources[*step.source]);
    } else {
      for (auto& o : sources) targets.push_back(&o);
    }
    auto known = [&](const std::string& name) {
      return std::any_of(targets.begin(), targets.end(), [&](const Ontology* o) { return has_concept(*o, name); });
    };
    if (step.op == MergeOp::filter) {
      for (const auto& n : step.names) {
        if (!known(n)) throw Error("filter names unknown concept '" + n + "'");
      }
      const std::set<std::string> names(step.names.begin(), step.names.end());
      for (auto* o : targets) apply_filter(*o, names);
    } else {
      for (const auto& [from, to] : step.table) {
        if (!known(from)) throw Error("mapping names unknown concept '" + from + "'");
      }
      for (auto* o : targets) apply_mapping(*o, step.table);
    }
  }
  if (sources.size() > 1) {
    result.ontology = fold(sources, MergeOp::merging, result.report);
  } else if (!sources.empty()) {
    result.ontology = std::move(sources.front());
  }
  return result;
}

nlohmann::json to_json(const MergeReport& report) {
  return {{"overlapping_classes", report.overlapping_classes},
          {"overlapping_relations", report.overlapping_relations},
          {"overlapping_attributes", report.overlapping_attributes}};
}

std::vector<MergeStep> merge_plan_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error("merge plan must be a JSON array");
  std::vector<MergeStep> plan;
  for (const auto& s : doc) {
    MergeStep step;
    const std::string op = s.value("op", "");
    if (op == "filter") {
      step.op = MergeOp::filter;
      step.names = s.value("names", std::vector<std::string>{});
    } else if (op == "mapping") {
      step.op = MergeOp::mapping;
      step.table = s.value("table", std::map<std::string, std::string>{});
    } else if (op == "merging") {
      step.op = MergeOp::merging;
    } else if (op == "ensemble") {
      step.op = MergeOp::ensemble;
    } else {
      throw Error("unknown merge step '" + op + "'");
    }
    if (s.contains("source")) step.source = s.at("source").get<std::size_t>();
    plan.push_back(std::move(step));
  }
  return plan;
}

} // namespace kgflow
