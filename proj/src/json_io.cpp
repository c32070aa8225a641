#include "kgflow/json_io.hpp"

#include <fstream>
#include <sstream>

#include "kgflow/error.hpp"
#include "kgflow/gfl.hpp"
#include "kgflow/registry.hpp"

namespace kgflow {

using nlohmann::json;

json to_json(const Flowline& f) {
  json doc;
  doc["vertices"] = json::array();
  for (const auto& v : f.vertices) {
    json jv{{"id", v.id},
            {"label", v.label},
            {"kind", to_string(v.kind)},
            {"function", v.function},
            {"resource_class", to_string(v.resource_class())}};
    if (!v.instance.empty()) jv["instance"] = v.instance;
    if (v.family) jv["operator_family"] = to_string(*v.family);
    if (!v.config.empty()) jv["config"] = v.config;
    doc["vertices"].push_back(std::move(jv));
  }
  doc["edges"] = json::array();
  for (const auto& e : f.edges) {
    json je{{"from", e.from}, {"to", e.to}};
    if (!e.columns.empty()) je["columns"] = e.columns;
    doc["edges"].push_back(std::move(je));
  }
  doc["entry"] = f.entry;
  doc["exit"] = f.exit;
  if (!f.bindings.empty()) {
    doc["bindings"] = json::object();
    for (const auto& [name, value] : f.bindings) doc["bindings"][name] = value;
  }
  return doc;
}

Flowline flowline_from_json(const json& doc) {
  try {
    Flowline f;
    const Registry& registry = Registry::builtin();
    for (const auto& jv : doc.at("vertices")) {
      TaskNode v;
      v.id = jv.at("id").get<std::string>();
      v.function = jv.value("function", v.id);
      v.label = jv.value("label", v.id);
      v.instance = jv.value("instance", "");
      const TaskSpec* spec = registry.find(v.function);
      if (jv.contains("kind")) {
        v.kind = parse_task_kind(jv.at("kind").get<std::string>());
      } else if (spec != nullptr) {
        v.kind = spec->kind;
      } else {
        throw Error("vertex '" + v.id + "' needs a kind");
      }
      if (jv.contains("operator_family")) {
        v.family = parse_operator_family(jv.at("operator_family").get<std::string>());
      } else if (spec != nullptr && v.kind == TaskKind::op) {
        v.family = spec->family;
      }
      if (jv.contains("config")) v.config = jv.at("config");
      f.vertices.push_back(std::move(v));
    }
    for (const auto& je : doc.at("edges")) {
      Edge e{je.at("from").get<std::string>(), je.at("to").get<std::string>(), {}};
      if (je.contains("columns")) e.columns = je.at("columns").get<std::vector<std::string>>();
      f.edges.push_back(std::move(e));
    }
    if (doc.contains("bindings")) {
      for (const auto& [name, value] : doc.at("bindings").items()) f.bindings[name] = value;
    }
    f.entry = doc.value("entry", "");
    f.exit = doc.value("exit", "");
    if (f.entry.empty() || f.exit.empty()) {
      for (const auto& v : f.vertices) {
        if (f.entry.empty() && f.predecessors(v.id).empty()) f.entry = v.id;
      }
      for (const auto& v : f.vertices) {
        if (f.exit.empty() && f.successors(v.id).empty()) f.exit = v.id;
      }
    }
    return f;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed flowline document: ") + e.what());
  }
}

json to_json(const TaskProfile& p) {
  json doc;
  doc["vertex_weights"] = json::object();
  for (const auto& [id, w] : p.vertex_weights) doc["vertex_weights"][id] = w;
  doc["edge_payloads"] = json::array();
  for (const auto& [key, bytes] : p.edge_payloads) {
    doc["edge_payloads"].push_back({{"from", key.first}, {"to", key.second}, {"bytes", bytes}});
  }
  return doc;
}

TaskProfile profile_from_json(const json& doc) {
  try {
    TaskProfile p;
    for (const auto& [id, w] : doc.at("vertex_weights").items()) p.vertex_weights[id] = w.get<double>();
    if (doc.contains("edge_payloads")) {
      for (const auto& je : doc.at("edge_payloads")) {
        p.edge_payloads[{je.at("from").get<std::string>(), je.at("to").get<std::string>()}] =
            je.at("bytes").get<double>();
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed profile document: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Flowline load_flowline(const std::filesystem::path& path) {
  if (path.extension() == ".gfl") return gfl::parse(read_text_file(path));
  return flowline_from_json(read_json_file(path));
}

} // namespace kgflow
