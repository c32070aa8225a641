#include "kgflow/corpus.hpp"

#include <array>
#include <map>
#include <random>

#include "kgflow/error.hpp"
#include "kgflow/json_io.hpp"

namespace kgflow {

namespace {

constexpr std::array persons{"Steve Jobs",     "Ada Lovelace",   "Grace Hopper",   "Alan Turing",
                             "Linus Torvalds", "Margaret Hamilton", "Tim Berners-Lee", "Barbara Liskov",
                             "Ken Thompson",   "Frances Allen",  "Donald Knuth",   "Radia Perlman"};
constexpr std::array orgs{"Apple",         "Acme Robotics",     "Globex",           "Initech",
                          "Umbrella Labs", "Stark Industries",  "Wayne Enterprises", "Hooli",
                          "Cyberdyne Systems", "Soylent Corp",  "Vandelay Industries", "Pied Piper"};
constexpr std::array places{"New York", "New York City", "Paris",   "Berlin", "Shenzhen",
                            "Toronto",  "Nairobi",       "Lima",    "Oslo",   "Kyoto"};

// Placeholders {P} {O} {L} {D}; relations refer to slot letters.
struct Template {
  const char* text;
  std::vector<std::tuple<char, char, const char*>> relations;
};

const std::vector<Template>& templates() {
  static const std::vector<Template> t{
      {"{P} founded {O} in {D}.", {{'P', 'O', "Found"}, {'O', 'D', "FoundedDate"}}},
      {"{P} works for {O}.", {{'P', 'O', "WorksFor"}}},
      {"{O} is headquartered in {L}.", {{'O', 'L', "LocatedIn"}}},
      {"{P} visited {L} in {D}.", {}},
      {"In {D}, {P} joined {O}, a company based in {L}.", {{'P', 'O', "WorksFor"}, {'O', 'L', "LocatedIn"}}},
      {"{O} was founded by {P} in {D}.", {{'P', 'O', "Found"}, {'O', 'D', "FoundedDate"}}},
  };
  return t;
}

std::string type_of(char slot) {
  switch (slot) {
    case 'P': return "PER";
    case 'O': return "ORG";
    case 'L': return "LOC";
    default: return "DATE";
  }
}

} // namespace

nlohmann::json to_json(const Chunk& c) {
  nlohmann::json doc{{"surface", c.surface}, {"type", c.type}, {"start", c.start}, {"end", c.end}};
  if (c.score != 1.0) doc["score"] = c.score;
  return doc;
}

Chunk chunk_from_json(const nlohmann::json& doc) {
  Chunk c;
  c.surface = doc.at("surface").get<std::string>();
  c.type = doc.at("type").get<std::string>();
  c.start = doc.at("start").get<std::size_t>();
  c.end = doc.at("end").get<std::size_t>();
  c.score = doc.value("score", 1.0);
  if (c.end < c.start) throw Error("chunk '" + c.surface + "' ends before it starts");
  if (c.score < 0.0 || c.score > 1.0) throw Error("chunk '" + c.surface + "' has score outside [0, 1]");
  return c;
}

Corpus corpus_from_jsonl(std::string_view text) {
  Corpus corpus;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      Document d;
      d.id = doc.at("id").is_string() ? doc.at("id").get<std::string>() : doc.at("id").dump();
      d.text = doc.at("text").get<std::string>();
      for (const auto& e : doc.value("entities", nlohmann::json::array())) {
        d.entities.push_back(chunk_from_json(e));
        if (d.entities.back().end > d.text.size()) throw Error("entity offsets exceed the sample");
      }
      for (const auto& r : doc.value("relations", nlohmann::json::array())) {
        GoldRelation g{r.at("subject").get<std::size_t>(), r.at("object").get<std::size_t>(),
                       r.at("label").get<std::string>()};
        if (g.subject >= d.entities.size() || g.object >= d.entities.size()) {
          throw Error("relation references a missing entity");
        }
        d.relations.push_back(std::move(g));
      }
      corpus.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

std::string to_jsonl(const Corpus& corpus, bool with_gold) {
  std::string out;
  for (const auto& d : corpus) {
    nlohmann::json doc{{"id", d.id}, {"text", d.text}};
    if (with_gold && (!d.entities.empty() || !d.relations.empty())) {
      doc["entities"] = nlohmann::json::array();
      for (const auto& e : d.entities) doc["entities"].push_back(to_json(e));
      doc["relations"] = nlohmann::json::array();
      for (const auto& r : d.relations) {
        doc["relations"].push_back({{"subject", r.subject}, {"object", r.object}, {"label", r.label}});
      }
    }
    out += doc.dump();
    out += '\n';
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) { return corpus_from_jsonl(read_text_file(path)); }

TripleSet gold_triples(const Corpus& corpus) {
  TripleSet out;
  for (const auto& d : corpus) {
    for (const auto& r : d.relations) {
      out.insert({canonical_name(d.entities[r.subject].surface), r.label,
                  canonical_name(d.entities[r.object].surface)});
    }
  }
  return out;
}

Ontology synthetic_ontology() {
  Ontology o;
  o.classes = {"PER", "ORG", "LOC", "DATE"};
  o.relations = {{"Found", "PER", "ORG"}, {"WorksFor", "PER", "ORG"}, {"LocatedIn", "ORG", "LOC"}};
  o.attributes = {{"FoundedDate", "ORG", "date"}};
  return o;
}

Corpus synthetic_corpus(std::size_t sentences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](const auto& pool) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return std::string(pool[d(rng)]);
  };
  std::uniform_int_distribution<int> year(1950, 2020);
  std::uniform_int_distribution<std::size_t> which(0, templates().size() - 1);

  Corpus corpus;
  for (std::size_t i = 0; i < sentences; ++i) {
    const auto& t = templates()[which(rng)];
    std::map<char, std::string> fill{
        {'P', pick(persons)}, {'O', pick(orgs)}, {'L', pick(places)}, {'D', std::to_string(year(rng))}};
    Document d;
    d.id = "s" + std::to_string(i + 1);
    std::map<char, std::size_t> entity_of;
    const std::string_view pattern = t.text;
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      if (pattern[k] == '{' && k + 2 < pattern.size() && pattern[k + 2] == '}') {
        const char slot = pattern[k + 1];
        const auto& surface = fill.at(slot);
        entity_of[slot] = d.entities.size();
        d.entities.push_back({surface, type_of(slot), d.text.size(), d.text.size() + surface.size()});
        d.text += surface;
        k += 2;
      } else {
        d.text += pattern[k];
      }
    }
    for (const auto& [s, o, label] : t.relations) d.relations.push_back({entity_of.at(s), entity_of.at(o), label});
    corpus.push_back(std::move(d));
  }
  return corpus;
}

} // namespace kgflow
