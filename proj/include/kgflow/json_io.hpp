#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kgflow/flowline.hpp"

namespace kgflow {

// Flowline document:
//   {"vertices": [{"id", "label", "kind", "function", "instance",
//                  "operator_family", "config"}],
//    "edges": [{"from", "to", "columns"}],
//    "entry", "exit", "bindings": {name: [literal, ...]}}
// `kind` and `operator_family` default from the built-in registry when the
// function is known; `entry`/`exit` default to the unique source/sink.
nlohmann::json to_json(const Flowline& flowline);
Flowline flowline_from_json(const nlohmann::json& doc);

// Profile document:
//   {"vertex_weights": {id: seconds},
//    "edge_payloads": [{"from", "to", "bytes"}]}
nlohmann::json to_json(const TaskProfile& profile);
TaskProfile profile_from_json(const nlohmann::json& doc);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Dispatches on extension: `.gfl` is parsed as GFL, anything else as JSON.
Flowline load_flowline(const std::filesystem::path& path);

} // namespace kgflow
