// Serves one mock model endpoint over stdin/stdout (JSON lines).
#include <iostream>

#include <CLI11.hpp>

#include "kgflow/endpoint.hpp"
#include "kgflow/error.hpp"
#include "kgflow/json_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mock model endpoint speaking the JSON-lines protocol"};
  std::string spec_path;
  app.add_option("spec", spec_path, "Endpoint spec (JSON file)")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);
  try {
    const std::filesystem::path path(spec_path);
    auto endpoint = kgflow::endpoint_from_json(kgflow::read_json_file(path), path.parent_path());
    std::ios::sync_with_stdio(false);
    kgflow::serve_endpoint(*endpoint, std::cin, std::cout);
  } catch (const kgflow::IoError& e) {
    std::cerr << "kgflow-endpoint: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "kgflow-endpoint: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
