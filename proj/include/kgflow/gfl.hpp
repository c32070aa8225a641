#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgflow/error.hpp"
#include "kgflow/flowline.hpp"
#include "kgflow/registry.hpp"

namespace kgflow::gfl {

// 1-based line and column into the source text.
struct SourceSpan {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t length = 0;
};

class ParseError : public Error {
public:
  ParseError(const std::string& message, SourceSpan span);
  [[nodiscard]] const SourceSpan& span() const { return span_; }
  [[nodiscard]] const std::string& message() const { return message_; }

private:
  std::string message_;
  SourceSpan span_;
};

struct CallNode {
  std::string ns;        // "model", "opt", or empty for a bare entry
  std::string function;
  std::string instance;  // `[name]`
  std::string predicate; // verbatim text inside `(...)`
  std::vector<std::string> outputs;  // `-> a, b`
  bool outlet = false;   // trailing `:`
  SourceSpan span;
  std::vector<CallNode> children;

  // Vertex identity within a flowline: `function` or `function[instance]`.
  [[nodiscard]] std::string vertex_id() const;
};

struct Binding {
  std::string name;
  nlohmann::json values = nlohmann::json::array();
  SourceSpan span;
};

struct GflDocument {
  std::vector<Binding> definitions;
  CallNode root;
};

// Grammar only: indentation, brackets, namespaces and call syntax.
GflDocument parse_document(std::string_view text);

// Resolves repeated calls into shared vertices, builds edges and validates the
// result against the registry. Semantic errors carry the span of the call.
Flowline build_flowline(const GflDocument& doc, const Registry& registry = Registry::builtin());

Flowline parse(std::string_view text, const Registry& registry = Registry::builtin());

// Canonical text: bindings first, 4-space indents, children ordered by vertex
// id, every vertex expanded at its first occurrence only.
std::string format(const Flowline& flowline);

std::string emit_dot(const Flowline& flowline);

} // namespace kgflow::gfl
