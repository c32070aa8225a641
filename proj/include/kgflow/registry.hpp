#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgflow/flowline.hpp"

namespace kgflow {

namespace col {
inline constexpr std::string_view sample = "sample";
inline constexpr std::string_view entity = "entity";
inline constexpr std::string_view entity_type = "entity_type";
inline constexpr std::string_view entity_pair = "entity_pair";
inline constexpr std::string_view entity_type_pair = "entity_type_pair";
inline constexpr std::string_view relation = "relation_category";
inline constexpr std::string_view attribute = "attribute";
inline constexpr std::string_view attribute_value = "attribute_value";
inline constexpr std::string_view triple = "triple";
inline constexpr std::string_view score = "meta.score";
inline constexpr std::string_view scores = "meta.scores";  // label -> score
} // namespace col

// Declared I/O of a task function. Output order matters: `-> a, b` bindings
// alias the outputs positionally.
struct TaskSpec {
  std::string function;
  TaskKind kind = TaskKind::op;
  std::optional<OperatorFamily> family;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

class Registry {
public:
  // Built-in operators plus the stock model names used in examples.
  static const Registry& builtin();

  void add(TaskSpec spec);
  void add_model(std::string function, TaskKind kind);
  [[nodiscard]] const TaskSpec* find(std::string_view function) const;
  [[nodiscard]] std::vector<std::string> functions() const;

private:
  std::map<std::string, TaskSpec, std::less<>> specs_;
};

// Columns the task observes: registry inputs, columns referenced by its
// predicate (after alias resolution) and its configured target column.
std::set<std::string> input_columns(const TaskNode& node, const Registry& registry,
                                    const std::map<std::string, std::string>& aliases);

// Alias -> canonical column, collected from every vertex's output bindings.
// Throws kgflow::Error when one alias names two different columns.
std::map<std::string, std::string> column_aliases(const Flowline& flowline,
                                                  const Registry& registry);

// Default target column for filters and mappers that do not configure one.
std::string default_target_column(std::string_view function);

} // namespace kgflow
