#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "kgflow/corpus.hpp"

namespace kgflow {

enum class ModelTask { cc, ce };

std::string_view to_string(ModelTask task);
ModelTask parse_model_task(std::string_view text);

// Label emitted for entity pairs without an accepted relation.
inline constexpr std::string_view no_relation = "no relation";

// A model behind the normalised CC/CE interface. Rows are the projected
// records of one data slice. CE answers {"chunks": [chunk, ...]} per row, CC
// answers {"label", "score", "scores"?}.
class ModelEndpoint {
public:
  virtual ~ModelEndpoint() = default;
  [[nodiscard]] virtual ModelTask task() const = 0;
  [[nodiscard]] virtual std::vector<std::string> label_set() const = 0;
  virtual std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) = 0;
};

using EndpointPtr = std::shared_ptr<ModelEndpoint>;

// CE: every whole-word occurrence of a gazetteer entry. Overlapping and
// nested matches are all reported.
class GazetteerEndpoint : public ModelEndpoint {
public:
  explicit GazetteerEndpoint(std::map<std::string, std::string> entries);
  [[nodiscard]] ModelTask task() const override { return ModelTask::ce; }
  [[nodiscard]] std::vector<std::string> label_set() const override;
  std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) override;

private:
  std::map<std::string, std::string> entries_;
};

struct KeywordRule {
  std::string label;
  std::string subject_type;
  std::string object_type;
  std::vector<std::string> between;  // any of these between the two spans
  std::vector<std::string> context;  // any of these anywhere in the sample
};

// Rules for the synthetic corpus.
std::vector<KeywordRule> default_keyword_rules();

// CC: first rule whose types and keywords match; otherwise "no relation".
class KeywordEndpoint : public ModelEndpoint {
public:
  explicit KeywordEndpoint(std::vector<KeywordRule> rules, double score = 0.9);
  [[nodiscard]] ModelTask task() const override { return ModelTask::cc; }
  [[nodiscard]] std::vector<std::string> label_set() const override;
  std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) override;

private:
  std::vector<KeywordRule> rules_;
  double score_;
};

// CE replaying gold entities. With recall < 1 a seeded shuffle of every gold
// chunk keeps the first round(recall * n); `complement` keeps the rest.
class OracleCeEndpoint : public ModelEndpoint {
public:
  explicit OracleCeEndpoint(const Corpus& gold, double recall = 1.0, std::uint64_t seed = 0,
                            bool complement = false);
  [[nodiscard]] ModelTask task() const override { return ModelTask::ce; }
  [[nodiscard]] std::vector<std::string> label_set() const override;
  std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) override;

private:
  std::map<std::string, std::set<Chunk>> by_text_;
  std::set<std::string> labels_;
};

// CC replaying gold relations with a fixed score; unannotated pairs get
// "no relation".
class OracleCcEndpoint : public ModelEndpoint {
public:
  explicit OracleCcEndpoint(const Corpus& gold, double score = 1.0);
  [[nodiscard]] ModelTask task() const override { return ModelTask::cc; }
  [[nodiscard]] std::vector<std::string> label_set() const override;
  std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) override;

private:
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t, std::size_t>;
  std::map<Key, std::string> labels_;
  std::set<std::string> label_set_;
  double score_;
};

// Line-delimited JSON over the stdin/stdout of a child process. The
// constructor performs the {"op": "hello"} handshake.
class SubprocessEndpoint : public ModelEndpoint {
public:
  explicit SubprocessEndpoint(std::vector<std::string> argv);
  ~SubprocessEndpoint() override;
  SubprocessEndpoint(const SubprocessEndpoint&) = delete;
  SubprocessEndpoint& operator=(const SubprocessEndpoint&) = delete;

  [[nodiscard]] ModelTask task() const override { return task_; }
  [[nodiscard]] std::vector<std::string> label_set() const override { return labels_; }
  std::vector<nlohmann::json> infer(const std::vector<nlohmann::json>& rows) override;

private:
  nlohmann::json request(const nlohmann::json& message);
  std::string read_line();

  std::vector<std::string> argv_;
  int fd_ = -1;
  int pid_ = -1;
  std::string buffer_;
  ModelTask task_ = ModelTask::ce;
  std::vector<std::string> labels_;
};

// Server side of the wire protocol: answers hello/infer until "bye" or EOF.
void serve_endpoint(ModelEndpoint& endpoint, std::istream& in, std::ostream& out);

// {"kind": "gazetteer", "entries": {surface: type} | "corpus": path}
// {"kind": "keyword", "rules": [...], "score"}
// {"kind": "oracle", "task": "ce"|"cc", "corpus": path, "recall", "seed", "complement", "score"}
// {"kind": "subprocess", "command": [argv...]}
// Relative paths resolve against `base_dir`.
EndpointPtr endpoint_from_json(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});

// {task id or function name: spec}
std::map<std::string, EndpointPtr> endpoints_from_json(const nlohmann::json& doc,
                                                       const std::filesystem::path& base_dir = {});

} // namespace kgflow
