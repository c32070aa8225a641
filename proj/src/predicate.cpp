#include "kgflow/predicate.hpp"

#include <cctype>
#include <vector>

namespace kgflow::predicate {

namespace {

enum class Tok { ident, string, number, lparen, rparen, lbracket, rbracket, comma, eq, ne, kw_in,
                 kw_not, kw_and, kw_or, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '.')) {
        ++i;
      }
      std::string word(s.substr(start, i - start));
      Tok kind = Tok::ident;
      if (word == "in") kind = Tok::kw_in;
      else if (word == "not") kind = Tok::kw_not;
      else if (word == "and") kind = Tok::kw_and;
      else if (word == "or") kind = Tok::kw_or;
      out.push_back({kind, std::move(word), start});
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      ++i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                              s[i] == 'e' || s[i] == 'E')) {
        ++i;
      }
      out.push_back({Tok::number, std::string(s.substr(start, i - start)), start});
    } else if (c == '"' || c == '\'') {
      ++i;
      std::string text;
      while (i < s.size() && s[i] != c) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        text += s[i++];
      }
      if (i >= s.size()) throw SyntaxError("unterminated string literal", start);
      ++i;
      out.push_back({Tok::string, std::move(text), start});
    } else if (c == '=' && i + 1 < s.size() && s[i + 1] == '=') {
      i += 2;
      out.push_back({Tok::eq, "==", start});
    } else if (c == '!' && i + 1 < s.size() && s[i + 1] == '=') {
      i += 2;
      out.push_back({Tok::ne, "!=", start});
    } else {
      Tok kind;
      switch (c) {
        case '(': kind = Tok::lparen; break;
        case ')': kind = Tok::rparen; break;
        case '[': kind = Tok::lbracket; break;
        case ']': kind = Tok::rbracket; break;
        case ',': kind = Tok::comma; break;
        default: throw SyntaxError(std::string("unexpected character '") + c + "'", start);
      }
      ++i;
      out.push_back({kind, std::string(1, c), start});
    }
  }
  out.push_back({Tok::end, "", s.size()});
  return out;
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::shared_ptr<const Node> parse_all() {
    auto n = parse_or();
    if (peek().kind != Tok::end) throw SyntaxError("unexpected '" + peek().text + "'", peek().offset);
    return n;
  }

private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  static std::shared_ptr<const Node> binary(Op op, std::shared_ptr<const Node> l,
                                            std::shared_ptr<const Node> r) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  std::shared_ptr<const Node> parse_or() {
    auto l = parse_and();
    while (peek().kind == Tok::kw_or) {
      take();
      l = binary(Op::logical_or, l, parse_and());
    }
    return l;
  }

  std::shared_ptr<const Node> parse_and() {
    auto l = parse_cmp();
    while (peek().kind == Tok::kw_and) {
      take();
      l = binary(Op::logical_and, l, parse_cmp());
    }
    return l;
  }

  std::shared_ptr<const Node> parse_cmp() {
    auto l = parse_primary();
    switch (peek().kind) {
      case Tok::eq: take(); return binary(Op::eq, l, parse_primary());
      case Tok::ne: take(); return binary(Op::ne, l, parse_primary());
      case Tok::kw_in: take(); return binary(Op::in, l, parse_primary());
      case Tok::kw_not: {
        const Token& t = take();
        if (peek().kind != Tok::kw_in) throw SyntaxError("expected 'in' after 'not'", t.offset);
        take();
        return binary(Op::not_in, l, parse_primary());
      }
      default: return l;
    }
  }

  nlohmann::json literal_value(const Token& t) {
    if (t.kind == Tok::string) return t.text;
    try {
      return std::stod(t.text);
    } catch (const std::exception&) {
      throw SyntaxError("bad number '" + t.text + "'", t.offset);
    }
  }

  std::shared_ptr<const Node> parse_primary() {
    const Token& t = take();
    auto n = std::make_shared<Node>();
    switch (t.kind) {
      case Tok::lparen: {
        auto inner = parse_or();
        if (take().kind != Tok::rparen) throw SyntaxError("expected ')'", t.offset);
        return inner;
      }
      case Tok::ident:
        n->op = Op::ident;
        n->name = t.text;
        return n;
      case Tok::string:
      case Tok::number:
        n->op = Op::literal;
        n->value = literal_value(t);
        return n;
      case Tok::lbracket: {
        n->op = Op::literal;
        n->value = nlohmann::json::array();
        if (peek().kind == Tok::rbracket) {
          take();
          return n;
        }
        for (;;) {
          const Token& item = take();
          if (item.kind == Tok::ident) n->value.push_back(item.text);
          else if (item.kind == Tok::string || item.kind == Tok::number) n->value.push_back(literal_value(item));
          else throw SyntaxError("expected list item", item.offset);
          const Token& sep = take();
          if (sep.kind == Tok::rbracket) break;
          if (sep.kind != Tok::comma) throw SyntaxError("expected ',' or ']'", sep.offset);
        }
        return n;
      }
      default:
        throw SyntaxError(t.kind == Tok::end ? "unexpected end of expression"
                                             : "unexpected '" + t.text + "'",
                          t.offset);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

bool truthy(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_string()) return !v.get<std::string>().empty();
  if (v.is_array()) return !v.empty();
  return false;
}

bool loosely_equal(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
  return a == b;
}

nlohmann::json eval(const Node& n, const Lookup& lookup) {
  switch (n.op) {
    case Op::literal: return n.value;
    case Op::ident: {
      auto v = lookup(n.name);
      if (!v) throw Error("unknown name '" + n.name + "' in predicate");
      return *v;
    }
    case Op::logical_and: return truthy(eval(*n.lhs, lookup)) && truthy(eval(*n.rhs, lookup));
    case Op::logical_or: return truthy(eval(*n.lhs, lookup)) || truthy(eval(*n.rhs, lookup));
    case Op::eq: return loosely_equal(eval(*n.lhs, lookup), eval(*n.rhs, lookup));
    case Op::ne: return !loosely_equal(eval(*n.lhs, lookup), eval(*n.rhs, lookup));
    case Op::in:
    case Op::not_in: {
      const auto needle = eval(*n.lhs, lookup);
      const auto hay = eval(*n.rhs, lookup);
      bool found = false;
      if (hay.is_array()) {
        for (const auto& item : hay) {
          if (loosely_equal(item, needle)) {
            found = true;
            break;
          }
        }
      } else if (hay.is_string() && needle.is_string()) {
        found = hay.get<std::string>().find(needle.get<std::string>()) != std::string::npos;
      } else {
        throw Error("right side of 'in' is not a list");
      }
      return n.op == Op::in ? found : !found;
    }
  }
  return false;
}

void collect(const Node& n, std::set<std::string>& all, std::set<std::string>& containers) {
  if (n.op == Op::ident) all.insert(n.name);
  if ((n.op == Op::in || n.op == Op::not_in) && n.rhs->op == Op::ident) containers.insert(n.rhs->name);
  if (n.lhs) collect(*n.lhs, all, containers);
  if (n.rhs) collect(*n.rhs, all, containers);
}

} // namespace

Expr Expr::parse(std::string_view text) {
  Expr e;
  e.text_ = std::string(text);
  e.root_ = Parser(tokenize(text)).parse_all();
  return e;
}

bool Expr::evaluate(const Lookup& lookup) const { return truthy(eval(*root_, lookup)); }

std::set<std::string> Expr::identifiers() const {
  std::set<std::string> all, containers;
  collect(*root_, all, containers);
  return all;
}

std::set<std::string> Expr::container_identifiers() const {
  std::set<std::string> all, containers;
  collect(*root_, all, containers);
  return containers;
}

} // namespace kgflow::predicate
