#include "kgflow/registry.hpp"

#include "kgflow/error.hpp"
#include "kgflow/predicate.hpp"

namespace kgflow {

namespace {

std::vector<std::string> cols(std::initializer_list<std::string_view> names) {
  return {names.begin(), names.end()};
}

TaskSpec op(std::string function, OperatorFamily family, std::vector<std::string> in,
            std::vector<std::string> out) {
  return TaskSpec{std::move(function), TaskKind::op, family, std::move(in), std::move(out)};
}

Registry make_builtin() {
  using F = OperatorFamily;
  Registry r;
  r.add(op("data", F::controller, {}, cols({col::sample})));
  r.add(op("start", F::controller, {}, cols({col::sample})));
  r.add(op("end", F::controller, {}, {}));
  r.add(op("filter", F::filter, {}, {}));
  r.add(op("entity_type_filter", F::filter, cols({col::entity_type}), {}));
  r.add(op("relation_filter", F::filter, cols({col::relation}), {}));
  r.add(op("score_filter", F::filter, cols({col::score}), {}));
  r.add(op("mapper", F::mapper, {}, {}));
  r.add(op("permutate", F::constructor, cols({col::entity, col::entity_type}),
           cols({col::entity_pair, col::entity_type_pair})));
  r.add(op("triple", F::constructor, cols({col::entity_pair, col::relation}), cols({col::triple})));
  r.add(op("merge", F::integrator, {}, {}));
  r.add(op("vote", F::integrator, cols({col::entity_pair, col::relation}), cols({col::relation})));
  r.add(op("score_ensemble", F::integrator, cols({col::entity_pair, col::relation, col::scores}),
           cols({col::relation, col::score})));
  r.add(op("chunk_union", F::integrator, cols({col::entity, col::entity_type}),
           cols({col::entity, col::entity_type})));
  for (const char* name : {"BertNER", "LSTMNER", "GazetteerNER", "OracleNER"}) {
    r.add_model(name, TaskKind::model_ce);
  }
  for (const char* name : {"BERTRE", "LSTMRE", "KeywordRE", "OracleRE"}) {
    r.add_model(name, TaskKind::model_cc);
  }
  return r;
}

} // namespace

const Registry& Registry::builtin() {
  static const Registry registry = make_builtin();
  return registry;
}

void Registry::add(TaskSpec spec) {
  auto key = spec.function;
  specs_.insert_or_assign(std::move(key), std::move(spec));
}

void Registry::add_model(std::string function, TaskKind kind) {
  TaskSpec spec;
  spec.function = std::move(function);
  spec.kind = kind;
  if (kind == TaskKind::model_ce) {
    spec.inputs = cols({col::sample});
    spec.outputs = cols({col::entity, col::entity_type, col::score});
  } else {
    spec.inputs = cols({col::sample, col::entity_pair, col::entity_type_pair});
    spec.outputs = cols({col::relation, col::entity_pair, col::entity_type_pair, col::score, col::scores});
  }
  add(std::move(spec));
}

const TaskSpec* Registry::find(std::string_view function) const {
  auto it = specs_.find(function);
  return it == specs_.end() ? nullptr : &it->second;
}

std::vector<std::string> Registry::functions() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs_) out.push_back(name);
  return out;
}

std::string default_target_column(std::string_view function) {
  if (function == "relation_filter") return std::string(col::relation);
  if (function == "score_filter") return std::string(col::score);
  return std::string(col::entity_type);
}

std::set<std::string> input_columns(const TaskNode& node, const Registry& registry,
                                    const std::map<std::string, std::string>& aliases) {
  auto resolve = [&](const std::string& name) {
    auto it = aliases.find(name);
    return it == aliases.end() ? name : it->second;
  };
  std::set<std::string> out;
  if (const TaskSpec* spec = registry.find(node.function)) {
    out.insert(spec->inputs.begin(), spec->inputs.end());
  }
  if (node.config.contains("predicate")) {
    auto expr = predicate::Expr::parse(node.config.at("predicate").get<std::string>());
    const auto containers = expr.container_identifiers();
    for (const auto& id : expr.identifiers()) {
      if (!containers.contains(id)) out.insert(resolve(id));
    }
  } else if (node.family == OperatorFamily::mapper ||
             (node.family == OperatorFamily::filter && node.function != "filter")) {
    out.insert(resolve(node.config.value("column", default_target_column(node.function))));
  }
  return out;
}

std::map<std::string, std::string> column_aliases(const Flowline& flowline,
                                                  const Registry& registry) {
  std::map<std::string, std::string> aliases;
  for (const auto& v : flowline.vertices) {
    if (!v.config.contains("outputs")) continue;
    const TaskSpec* spec = registry.find(v.function);
    if (spec == nullptr) continue;
    const auto names = v.config.at("outputs").get<std::vector<std::string>>();
    if (names.size() > spec->outputs.size()) {
      throw Error("task '" + v.id + "' binds " + std::to_string(names.size()) +
                  " outputs but produces " + std::to_string(spec->outputs.size()));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto [it, inserted] = aliases.emplace(names[i], spec->outputs[i]);
      if (!inserted && it->second != spec->outputs[i]) {
        throw Error("output binding '" + names[i] + "' names both '" + it->second + "' and '" +
                    spec->outputs[i] + "'");
      }
    }
  }
  return aliases;
}

} // namespace kgflow
