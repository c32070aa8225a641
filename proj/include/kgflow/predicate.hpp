#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "kgflow/error.hpp"

namespace kgflow::predicate {

// Filter expressions: identifiers, string/number literals, list literals,
// `in`, `not in`, `==`, `!=`, `and`, `or` and parentheses.
class SyntaxError : public Error {
public:
  SyntaxError(const std::string& what, std::size_t offset) : Error(what), offset_(offset) {}
  [[nodiscard]] std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

enum class Op { ident, literal, in, not_in, eq, ne, logical_and, logical_or };

struct Node {
  Op op = Op::literal;
  std::string name;
  nlohmann::json value;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

// Resolves an identifier to a value; nullopt means "unknown name".
using Lookup = std::function<std::optional<nlohmann::json>(std::string_view)>;

class Expr {
public:
  static Expr parse(std::string_view text);

  [[nodiscard]] bool evaluate(const Lookup& lookup) const;
  [[nodiscard]] const std::string& text() const { return text_; }
  // Every identifier in the expression.
  [[nodiscard]] std::set<std::string> identifiers() const;
  // Identifiers used as the container of `in` / `not in`.
  [[nodiscard]] std::set<std::string> container_identifiers() const;

private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

} // namespace kgflow::predicate
