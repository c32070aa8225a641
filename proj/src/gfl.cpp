#include "kgflow/gfl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "kgflow/predicate.hpp"

namespace kgflow::gfl {

ParseError::ParseError(const std::string& message, SourceSpan span)
    : Error(std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
      message_(message),
      span_(span) {}

std::string CallNode::vertex_id() const {
  return instance.empty() ? function : function + "[" + instance + "]";
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_identifier(std::string_view s) {
  return !s.empty() && ident_start(s.front()) && std::all_of(s.begin(), s.end(), ident_char);
}

// Cursor over one source line; columns are 1-based.
class Cursor {
public:
  Cursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  [[nodiscard]] bool done() const { return pos_ >= text_.size(); }
  [[nodiscard]] char peek() const { return done() ? '\0' : text_[pos_]; }
  [[nodiscard]] std::size_t column() const { return pos_ + 1; }
  [[nodiscard]] std::size_t pos() const { return pos_; }
  void advance(std::size_t n = 1) { pos_ += n; }
  [[nodiscard]] bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  [[nodiscard]] SourceSpan span(std::size_t col, std::size_t len = 1) const { return {line_, col, len}; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, span(column())); }

  std::string identifier(const char* what) {
    if (!ident_start(peek())) fail(std::string("expected ") + what);
    const std::size_t start = pos_;
    while (!done() && ident_char(peek())) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // Text between a `(` at the cursor and its matching `)`.
  std::string balanced_parens() {
    const std::size_t open_col = column();
    int depth = 0;
    char quote = '\0';
    const std::size_t start = pos_ + 1;
    for (; !done(); ++pos_) {
      const char c = peek();
      if (quote != '\0') {
        if (c == '\\') ++pos_;
        else if (c == quote) quote = '\0';
        continue;
      }
      if (c == '"' || c == '\'') quote = c;
      else if (c == '(' || c == '[') ++depth;
      else if (c == ')' || c == ']') {
        if (--depth == 0) {
          if (c != ')') break;
          std::string inner(text_.substr(start, pos_ - start));
          ++pos_;
          return inner;
        }
      }
    }
    throw ParseError("unbalanced brackets", span(open_col));
  }

private:
  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

CallNode parse_call(Cursor& cur, bool root) {
  CallNode call;
  const std::size_t start_col = cur.column();
  std::string first = cur.identifier(root ? "entry name" : "namespace");
  if (cur.peek() == '.') {
    cur.advance();
    if (first != "model" && first != "opt") {
      throw ParseError("unknown namespace '" + first + "'", cur.span(start_col, first.size()));
    }
    call.ns = first;
    call.function = cur.identifier("function name");
  } else if (root) {
    call.function = first;
  } else {
    cur.fail("expected '.' after namespace");
  }
  if (cur.peek() == '[') {
    const std::size_t open = cur.column();
    cur.advance();
    cur.skip_spaces();
    call.instance = cur.identifier("instance label");
    cur.skip_spaces();
    if (cur.peek() != ']') throw ParseError("unbalanced brackets", cur.span(open));
    cur.advance();
  }
  cur.skip_spaces();
  if (cur.peek() == '(') {
    const std::size_t open = cur.column();
    call.predicate = cur.balanced_parens();
    try {
      predicate::Expr::parse(call.predicate);
    } catch (const predicate::SyntaxError& e) {
      throw ParseError(std::string("bad predicate: ") + e.what(), cur.span(open + 1 + e.offset()));
    }
    cur.skip_spaces();
  }
  if (cur.starts_with("->")) {
    cur.advance(2);
    for (;;) {
      cur.skip_spaces();
      call.outputs.push_back(cur.identifier("output binding"));
      cur.skip_spaces();
      if (cur.peek() != ',') break;
      cur.advance();
    }
  }
  cur.skip_spaces();
  if (cur.peek() == ':') {
    call.outlet = true;
    cur.advance();
    cur.skip_spaces();
  }
  if (!cur.done()) {
    if (cur.peek() == ')' || cur.peek() == ']') cur.fail("unbalanced brackets");
    cur.fail(std::string("unexpected '") + cur.peek() + "'");
  }
  call.span = cur.span(start_col, cur.column() - start_col);
  return call;
}

nlohmann::json parse_literal_list(Cursor& cur) {
  if (cur.peek() != '[') cur.fail("expected '[' to start a literal list");
  const std::size_t open = cur.column();
  cur.advance();
  nlohmann::json values = nlohmann::json::array();
  cur.skip_spaces();
  if (cur.peek() == ']') {
    cur.advance();
    return values;
  }
  for (;;) {
    cur.skip_spaces();
    const char c = cur.peek();
    if (c == '"' || c == '\'') {
      cur.advance();
      std::string s;
      while (!cur.done() && cur.peek() != c) {
        if (cur.peek() == '\\') cur.advance();
        s += cur.peek();
        cur.advance();
      }
      if (cur.done()) throw ParseError("unterminated string literal", cur.span(open));
      cur.advance();
      values.push_back(s);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      std::string num;
      while (!cur.done() && (std::isdigit(static_cast<unsigned char>(cur.peek())) || cur.peek() == '.' ||
                             cur.peek() == '-' || cur.peek() == 'e' || cur.peek() == 'E')) {
        num += cur.peek();
        cur.advance();
      }
      try {
        values.push_back(std::stod(num));
      } catch (const std::exception&) {
        cur.fail("bad number '" + num + "'");
      }
    } else if (ident_start(c)) {
      values.push_back(cur.identifier("literal"));
    } else if (cur.done()) {
      throw ParseError("unbalanced brackets", cur.span(open));
    } else {
      cur.fail("expected a literal");
    }
    cur.skip_spaces();
    if (cur.peek() == ',') {
      cur.advance();
      continue;
    }
    if (cur.peek() == ']') {
      cur.advance();
      break;
    }
    if (cur.done()) throw ParseError("unbalanced brackets", cur.span(open));
    cur.fail("expected ',' or ']'");
  }
  cur.skip_spaces();
  if (!cur.done()) cur.fail("unexpected text after literal list");
  return values;
}

} // namespace

GflDocument parse_document(std::string_view text) {
  GflDocument doc;
  bool have_root = false;
  std::size_t unit = 0;
  // Stack of pointers to the most recent call at each depth.
  std::vector<CallNode*> stack;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t indent = 0;
    while (indent < line.size() && (line[indent] == ' ' || line[indent] == '\t')) {
      if (line[indent] == '\t') {
        throw ParseError("tabs are not allowed in indentation", {line_no, indent + 1, 1});
      }
      ++indent;
    }
    if (indent == line.size() || line[indent] == '#') {
      if (end == text.size()) break;
      continue;
    }
    Cursor cur(line, line_no);
    cur.advance(indent);

    if (cur.peek() == ':') {
      if (indent != 0) cur.fail("the entry line must not be indented");
      if (have_root) cur.fail("a flowline has exactly one ':' entry");
      cur.advance();
      doc.root = parse_call(cur, true);
      have_root = true;
      stack.assign(1, &doc.root);
    } else if (cur.peek() == '|') {
      if (!have_root) cur.fail("pipe before the ':' entry line");
      if (unit == 0) {
        if (indent == 0 || indent % 4 != 0) {
          throw ParseError("indentation must be a multiple of 4 spaces", {line_no, 1, indent});
        }
        unit = indent;
      }
      if (indent % unit != 0) {
        throw ParseError("inconsistent indentation (unit is " + std::to_string(unit) + " spaces)",
                         {line_no, 1, indent});
      }
      const std::size_t depth = indent / unit;
      if (depth == 0) cur.fail("pipe must be indented under a call");
      if (depth > stack.size()) {
        throw ParseError("indentation jumps more than one level", {line_no, 1, indent});
      }
      cur.advance();
      cur.skip_spaces();
      CallNode call = parse_call(cur, false);
      stack.resize(depth);
      CallNode* parent = stack.back();
      parent->children.push_back(std::move(call));
      stack.push_back(&parent->children.back());
    } else if (ident_start(cur.peek())) {
      const std::size_t col = cur.column();
      std::string name = cur.identifier("binding name");
      cur.skip_spaces();
      if (!cur.starts_with(":=")) cur.fail("expected ':=' after '" + name + "'");
      if (indent != 0) throw ParseError("bindings must not be indented", {line_no, 1, indent});
      cur.advance(2);
      cur.skip_spaces();
      Binding b{name, parse_literal_list(cur), {line_no, col, name.size()}};
      doc.definitions.push_back(std::move(b));
    } else {
      cur.fail("expected a binding, the ':' entry or a '|' pipe");
    }
    if (end == text.size()) break;
  }
  if (!have_root) throw ParseError("missing ':' entry line", {std::max<std::size_t>(line_no, 1), 1, 0});
  return doc;
}

namespace {

struct Builder {
  const GflDocument& doc;
  const Registry& registry;
  Flowline flowline;
  std::map<std::string, std::string> ns_of;
  std::map<std::string, SourceSpan> first_span;
  std::set<EdgeKey> edge_set;
  std::map<std::string, std::size_t> binding_line;
  std::vector<const CallNode*> outlets;

  TaskNode& vertex(const std::string& id) {
    return flowline.vertices[*flowline.index_of(id)];
  }

  std::string visit(const CallNode& call) {
    const std::string id = call.vertex_id();
    if (call.outlet) outlets.push_back(&call);
    check_bindings(call);
    if (!ns_of.contains(id)) {
      ns_of[id] = call.ns;
      first_span[id] = call.span;
      TaskNode v;
      v.id = id;
      v.label = id;
      v.function = call.function;
      v.instance = call.instance;
      const TaskSpec* spec = registry.find(call.function);
      if (call.ns == "model") {
        v.kind = (spec != nullptr && spec->kind != TaskKind::op) ? spec->kind : TaskKind::model_ce;
      } else {
        v.kind = TaskKind::op;
        if (spec != nullptr && spec->kind == TaskKind::op) v.family = spec->family;
      }
      if (!call.predicate.empty()) v.config["predicate"] = call.predicate;
      if (!call.outputs.empty()) v.config["outputs"] = call.outputs;
      flowline.vertices.push_back(std::move(v));
    } else {
      if (ns_of[id] != call.ns) {
        throw ParseError("label conflict: '" + id + "' is used with namespaces '" + ns_of[id] +
                             "' and '" + call.ns + "'",
                         call.span);
      }
      TaskNode& v = vertex(id);
      merge_attr(v, "predicate", call.predicate.empty() ? nlohmann::json() : nlohmann::json(call.predicate), call);
      merge_attr(v, "outputs", call.outputs.empty() ? nlohmann::json() : nlohmann::json(call.outputs), call);
    }
    return id;
  }

  void merge_attr(TaskNode& v, const char* key, const nlohmann::json& value, const CallNode& call) {
    if (value.is_null()) return;
    if (!v.config.contains(key)) {
      v.config[key] = value;
    } else if (v.config[key] != value) {
      throw ParseError("label conflict: '" + v.id + "' is redefined with a different " + key, call.span);
    }
  }

  void check_bindings(const CallNode& call) {
    if (call.predicate.empty()) return;
    const auto expr = predicate::Expr::parse(call.predicate);
    for (const auto& name : expr.container_identifiers()) {
      auto it = binding_line.find(name);
      if (it == binding_line.end() || it->second > call.span.line) {
        throw ParseError("binding '" + name + "' is not defined before use", call.span);
      }
    }
  }

  void add_edge(const std::string& from, const std::string& to) {
    if (edge_set.insert({from, to}).second) flowline.edges.push_back({from, to, {}});
  }

  void walk(const CallNode& parent, const std::string& parent_id) {
    for (const auto& child : parent.children) {
      const bool seen = ns_of.contains(child.vertex_id());
      const std::string child_id = visit(child);
      // A repeated call directly under the entry that opens a nested block
      // re-anchors an existing vertex instead of piping from the entry.
      const bool anchor = (&parent == &doc.root) && seen && !child.children.empty();
      if (!anchor) add_edge(parent_id, child_id);
      walk(child, child_id);
    }
  }
};

} // namespace

Flowline build_flowline(const GflDocument& doc, const Registry& registry) {
  Builder b{doc, registry, {}, {}, {}, {}, {}, {}};
  for (const auto& def : doc.definitions) {
    if (b.binding_line.contains(def.name)) {
      throw ParseError("binding '" + def.name + "' is defined twice", def.span);
    }
    b.binding_line[def.name] = def.span.line;
    b.flowline.bindings[def.name] = def.values;
  }
  const std::string root_id = b.visit(doc.root);
  b.walk(doc.root, root_id);

  if (b.outlets.empty()) throw ParseError("missing outlet: exactly one call must end with ':'", doc.root.span);
  for (const CallNode* o : b.outlets) {
    if (o->vertex_id() != b.outlets.front()->vertex_id()) {
      throw ParseError("multiple outlets: '" + b.outlets.front()->vertex_id() + "' and '" + o->vertex_id() + "'",
                       o->span);
    }
  }
  b.flowline.entry = root_id;
  b.flowline.exit = b.outlets.front()->vertex_id();

  for (auto& e : b.flowline.edges) {
    const TaskNode& src = *b.flowline.find(e.from);
    if (src.config.contains("outputs")) e.columns = src.config.at("outputs").get<std::vector<std::string>>();
  }

  const auto report = validate(b.flowline, &registry);
  if (!report.ok()) {
    const auto& err = report.errors.front();
    SourceSpan span = doc.root.span;
    if (auto it = b.first_span.find(err.subject); it != b.first_span.end()) span = it->second;
    throw ParseError(err.code + ": " + err.message, span);
  }
  return std::move(b.flowline);
}

Flowline parse(std::string_view text, const Registry& registry) {
  return build_flowline(parse_document(text), registry);
}

namespace {

std::string literal_text(const nlohmann::json& v) {
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  return v.dump();
}

std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) out += ident_char(c) ? c : '_';
  if (out.empty() || !ident_start(out.front())) out = "t" + out;
  return out;
}

// Printed identity for every vertex; keeps the original id when it already
// has the `function` / `function[instance]` shape.
std::map<std::string, std::pair<std::string, std::string>> printed_names(const Flowline& f) {
  std::map<std::string, std::pair<std::string, std::string>> names;
  std::set<std::string> used;
  for (const auto& v : f.vertices) {
    std::string function = is_identifier(v.function) ? v.function : sanitize(v.function);
    std::string instance = v.instance;
    const std::string derived = instance.empty() ? function : function + "[" + instance + "]";
    if (derived != v.id || !is_identifier(function) || (!instance.empty() && !is_identifier(instance))) {
      instance = sanitize(v.id);
    }
    auto key = [&] { return instance.empty() ? function : function + "[" + instance + "]"; };
    const std::string base = instance;
    for (int n = 2; used.contains(key()); ++n) {
      instance = (base.empty() ? function : base) + "_" + std::to_string(n);
    }
    used.insert(key());
    names[v.id] = {function, instance};
  }
  return names;
}

} // namespace

std::string format(const Flowline& f) {
  std::ostringstream os;
  for (const auto& [name, values] : f.bindings) {
    os << name << " := [";
    bool first = true;
    for (const auto& item : values) {
      os << (first ? "" : ", ") << literal_text(item);
      first = false;
    }
    os << "]\n";
  }
  const auto names = printed_names(f);
  auto call_text = [&](const TaskNode& v, bool root, bool first_occurrence) {
    const auto& [function, instance] = names.at(v.id);
    std::string s;
    if (!(root && v.kind == TaskKind::op)) s += v.is_model() ? "model." : "opt.";
    s += function;
    if (!instance.empty()) s += "[" + instance + "]";
    if (first_occurrence) {
      if (v.config.contains("predicate")) s += "(" + v.config.at("predicate").get<std::string>() + ")";
      if (v.config.contains("outputs")) {
        const auto outs = v.config.at("outputs").get<std::vector<std::string>>();
        s += " ->";
        for (std::size_t i = 0; i < outs.size(); ++i) s += (i == 0 ? " " : ", ") + outs[i];
      }
      if (v.id == f.exit) s += ":";
    }
    return s;
  };

  std::set<std::string> expanded;
  auto walk = [&](auto&& self, const std::string& id, std::size_t depth) -> void {
    auto children = f.successors(id);
    auto printed = [&](const std::string& v) {
      const auto& [function, instance] = names.at(v);
      return instance.empty() ? function : function + "[" + instance + "]";
    };
    std::sort(children.begin(), children.end(),
              [&](const std::string& a, const std::string& b) { return printed(a) < printed(b); });
    for (const auto& c : children) {
      const bool first = !expanded.contains(c);
      os << std::string(depth * 4, ' ') << "| " << call_text(*f.find(c), false, first) << '\n';
      if (first) {
        expanded.insert(c);
        self(self, c, depth + 1);
      }
    }
  };
  const TaskNode* entry = f.find(f.entry);
  if (entry == nullptr) throw Error("flowline has no entry vertex");
  os << ':' << call_text(*entry, true, true) << '\n';
  expanded.insert(entry->id);
  walk(walk, entry->id, 1);
  return os.str();
}

std::string emit_dot(const Flowline& f) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph flowline {\n";
  for (const auto& v : f.vertices) {
    const char* shape = v.kind == TaskKind::model_ce ? "ellipse" : v.kind == TaskKind::model_cc ? "hexagon" : "box";
    os << "  " << quote(v.id) << " [shape=" << shape;
    if (v.label != v.id && !v.label.empty()) os << ", label=" << quote(v.label);
    if (v.config.contains("predicate")) os << ", tooltip=" << quote(v.config.at("predicate").get<std::string>());
    os << "];\n";
  }
  for (const auto& e : f.edges) os << "  " << quote(e.from) << " -> " << quote(e.to) << ";\n";
  os << "}\n";
  return os.str();
}

} // namespace kgflow::gfl
