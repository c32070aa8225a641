#include "kgflow/triples.hpp"

#include <cctype>
#include <sstream>

#include "kgflow/error.hpp"
#include "kgflow/ontology.hpp"

namespace kgflow {

namespace {

bool unreserved(unsigned char c) {
  return std::isalnum(c) != 0 || c == '-' || c == '.' || c == '_' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string escape_literal(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  void skip_space() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error("n-triples line " + std::to_string(line) + ": " + what);
  }
};

// Returns the term text and whether it was a literal.
std::pair<std::string, bool> read_term(Cursor& c) {
  c.skip_space();
  if (c.pos >= c.text.size()) c.fail("unexpected end of line");
  if (c.text[c.pos] == '<') {
    const auto close = c.text.find('>', c.pos);
    if (close == std::string_view::npos) c.fail("unterminated IRI");
    std::string iri(c.text.substr(c.pos + 1, close - c.pos - 1));
    c.pos = close + 1;
    return {iri, false};
  }
  if (c.text[c.pos] == '"') {
    std::string out;
    ++c.pos;
    while (true) {
      if (c.pos >= c.text.size()) c.fail("unterminated literal");
      const char ch = c.text[c.pos++];
      if (ch == '"') break;
      if (ch != '\\') {
        out += ch;
        continue;
      }
      if (c.pos >= c.text.size()) c.fail("dangling escape");
      const char e = c.text[c.pos++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: c.fail(std::string("unknown escape \\") + e);
      }
    }
    // Datatype or language tags are accepted and dropped.
    if (c.pos < c.text.size() && c.text[c.pos] == '@') {
      while (c.pos < c.text.size() && c.text[c.pos] != ' ' && c.text[c.pos] != '\t') ++c.pos;
    } else if (c.text.substr(c.pos, 2) == "^^") {
      c.pos += 2;
      read_term(c);
    }
    return {out, true};
  }
  c.fail("expected IRI or literal");
}

std::string local_name(const std::string& iri, std::string_view ns) {
  if (!ns.empty() && iri.compare(0, ns.size(), ns) == 0) return decode_iri_segment(iri.substr(ns.size()));
  return iri;
}

} // namespace

std::string canonical_name(std::string_view surface) {
  std::string out;
  bool gap = false;
  for (char c : surface) {
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      gap = !out.empty();
      continue;
    }
    if (gap) out += '_';
    gap = false;
    out += c;
  }
  return out;
}

std::string encode_iri_segment(std::string_view name) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (unreserved(c)) {
      out += ch;
    } else {
      out += '%';
      out += digits[c >> 4];
      out += digits[c & 0xF];
    }
  }
  return out;
}

std::string decode_iri_segment(std::string_view segment) {
  std::string out;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] == '%' && i + 2 < segment.size()) {
      const int hi = hex_value(segment[i + 1]);
      const int lo = hex_value(segment[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        continue;
      }
    }
    out += segment[i];
  }
  return out;
}

std::string to_ntriples(const TripleSet& triples, std::string_view ns, const Ontology* ontology) {
  std::ostringstream out;
  const std::string base(ns);
  for (const auto& t : triples) {
    out << '<' << base << encode_iri_segment(t.s) << "> <" << base << encode_iri_segment(t.p) << "> ";
    if (ontology != nullptr && ontology->has_attribute(t.p)) {
      out << '"' << escape_literal(t.o) << '"';
    } else {
      out << '<' << base << encode_iri_segment(t.o) << '>';
    }
    out << " .\n";
  }
  return out.str();
}

TripleSet parse_ntriples(std::string_view text, std::string_view ns) {
  TripleSet out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    Cursor c{text.substr(start, end - start), 0, ++line_no};
    start = end + 1;
    c.skip_space();
    if (c.pos >= c.text.size() || c.text[c.pos] == '#') continue;
    auto [s, s_lit] = read_term(c);
    auto [p, p_lit] = read_term(c);
    auto [o, o_lit] = read_term(c);
    if (s_lit || p_lit) c.fail("subject and predicate must be IRIs");
    c.skip_space();
    if (c.pos >= c.text.size() || c.text[c.pos] != '.') c.fail("expected '.'");
    out.insert({local_name(s, ns), local_name(p, ns), o_lit ? o : local_name(o, ns)});
  }
  return out;
}

Prf prf_from_counts(const EvalCounts& counts) {
  Prf r;
  r.counts = counts;
  const auto tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) r.precision = tp / static_cast<double>(counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0) r.recall = tp / static_cast<double>(counts.tp + counts.fn);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Prf eval_prf(const TripleSet& predicted, const TripleSet& gold) {
  EvalCounts c;
  for (const auto& t : predicted) {
    if (gold.contains(t)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = gold.size() - c.tp;
  return prf_from_counts(c);
}

} // namespace kgflow
