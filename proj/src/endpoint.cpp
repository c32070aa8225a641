#include "kgflow/endpoint.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "kgflow/error.hpp"

namespace kgflow {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

Chunk pair_member(const nlohmann::json& row, const char* which) {
  return chunk_from_json(row.at("entity_pair").at(which));
}

std::string type_of(const nlohmann::json& row, std::size_t index, const Chunk& fallback) {
  if (row.contains("entity_type_pair") && row.at("entity_type_pair").is_array() &&
      row.at("entity_type_pair").size() == 2) {
    return row.at("entity_type_pair")[index].get<std::string>();
  }
  return fallback.type;
}

bool contains_any(std::string_view text, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return text.find(n) != std::string_view::npos; });
}

nlohmann::json cc_answer(const std::string& label, double score) {
  return {{"label", label}, {"score", score}, {"scores", {{label, score}}}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

std::string_view to_string(ModelTask task) { return task == ModelTask::cc ? "cc" : "ce"; }

ModelTask parse_model_task(std::string_view text) {
  if (text == "cc") return ModelTask::cc;
  if (text == "ce") return ModelTask::ce;
  throw Error("unknown model task '" + std::string(text) + "'");
}

GazetteerEndpoint::GazetteerEndpoint(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {}

std::vector<std::string> GazetteerEndpoint::label_set() const {
  std::set<std::string> out;
  for (const auto& [surface, type] : entries_) out.insert(type);
  return {out.begin(), out.end()};
}

std::vector<nlohmann::json> GazetteerEndpoint::infer(const std::vector<nlohmann::json>& rows) {
  std::vector<nlohmann::json> out;
  for (const auto& row : rows) {
    const auto text = row.at("sample").get<std::string>();
    std::vector<Chunk> found;
    for (const auto& [surface, type] : entries_) {
      if (surface.empty()) continue;
      for (auto pos = text.find(surface); pos != std::string::npos; pos = text.find(surface, pos + 1)) {
        const auto end = pos + surface.size();
        if (pos > 0 && word_char(text[pos - 1])) continue;
        if (end < text.size() && word_char(text[end])) continue;
        found.push_back({surface, type, pos, end});
      }
    }
    std::sort(found.begin(), found.end(),
              [](const Chunk& a, const Chunk& b) { return std::tie(a.start, a.end) < std::tie(b.start, b.end); });
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : found) chunks.push_back(to_json(c));
    out.push_back({{"chunks", chunks}});
  }
  return out;
}

std::vector<KeywordRule> default_keyword_rules() {
  return {
      {"Found", "PER", "ORG", {"founded"}, {}},
      {"WorksFor", "PER", "ORG", {"works for", "joined"}, {}},
      {"LocatedIn", "ORG", "LOC", {"headquartered in", "based in"}, {}},
      {"FoundedDate", "ORG", "DATE", {" in "}, {"founded"}},
  };
}

KeywordEndpoint::KeywordEndpoint(std::vector<KeywordRule> rules, double score)
    : rules_(std::move(rules)), score_(score) {
  if (score_ < 0.0 || score_ > 1.0) throw Error("keyword endpoint score must lie in [0, 1]");
}

std::vector<std::string> KeywordEndpoint::label_set() const {
  std::set<std::string> out{std::string(no_relation)};
  for (const auto& r : rules_) out.insert(r.label);
  return {out.begin(), out.end()};
}

std::vector<nlohmann::json> KeywordEndpoint::infer(const std::vector<nlohmann::json>& rows) {
  std::vector<nlohmann::json> out;
  for (const auto& row : rows) {
    const auto text = row.at("sample").get<std::string>();
    const Chunk s = pair_member(row, "subject");
    const Chunk o = pair_member(row, "object");
    const auto s_type = type_of(row, 0, s);
    const auto o_type = type_of(row, 1, o);
    const auto lo = std::min(s.end, o.end);
    const auto hi = std::max(s.start, o.start);
    const std::string_view between = lo < hi && hi <= text.size()
                                         ? std::string_view(text).substr(lo, hi - lo)
                                         : std::string_view{};
    std::string label(no_relation);
    for (const auto& r : rules_) {
      if (r.subject_type != s_type || r.object_type != o_type) continue;
      if (!r.between.empty() && !contains_any(between, r.between)) continue;
      if (!r.context.empty() && !contains_any(text, r.context)) continue;
      label = r.label;
      break;
    }
    out.push_back(cc_answer(label, score_));
  }
  return out;
}

OracleCeEndpoint::OracleCeEndpoint(const Corpus& gold, double recall, std::uint64_t seed, bool complement) {
  if (recall < 0.0 || recall > 1.0) throw Error("oracle recall must lie in [0, 1]");
  std::vector<std::pair<const std::string*, const Chunk*>> all;
  for (const auto& d : gold) {
    for (const auto& e : d.entities) all.emplace_back(&d.text, &e);
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  if (recall < 1.0) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto keep = static_cast<std::size_t>(std::llround(recall * static_cast<double>(all.size())));
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if ((rank < keep) == complement) continue;
    const auto& [text, chunk] = all[order[rank]];
    by_text_[*text].insert(*chunk);
    labels_.insert(chunk->type);
  }
}

std::vector<std::string> OracleCeEndpoint::label_set() const { return {labels_.begin(), labels_.end()}; }

std::vector<nlohmann::json> OracleCeEndpoint::infer(const std::vector<nlohmann::json>& rows) {
  std::vector<nlohmann::json> out;
  for (const auto& row : rows) {
    nlohmann::json chunks = nlohmann::json::array();
    auto it = by_text_.find(row.at("sample").get<std::string>());
    if (it != by_text_.end()) {
      std::vector<Chunk> sorted(it->second.begin(), it->second.end());
      std::sort(sorted.begin(), sorted.end(), [](const Chunk& a, const Chunk& b) {
        return std::tie(a.start, a.end, a.type) < std::tie(b.start, b.end, b.type);
      });
      for (const auto& c : sorted) chunks.push_back(to_json(c));
    }
    out.push_back({{"chunks", chunks}});
  }
  return out;
}

OracleCcEndpoint::OracleCcEndpoint(const Corpus& gold, double score) : score_(score) {
  if (score_ < 0.0 || score_ > 1.0) throw Error("oracle score must lie in [0, 1]");
  label_set_.insert(std::string(no_relation));
  for (const auto& d : gold) {
    for (const auto& r : d.relations) {
      const auto& s = d.entities[r.subject];
      const auto& o = d.entities[r.object];
      labels_[{d.text, s.start, s.end, o.start, o.end}] = r.label;
      label_set_.insert(r.label);
    }
  }
}

std::vector<std::string> OracleCcEndpoint::label_set() const { return {label_set_.begin(), label_set_.end()}; }

std::vector<nlohmann::json> OracleCcEndpoint::infer(const std::vector<nlohmann::json>& rows) {
  std::vector<nlohmann::json> out;
  for (const auto& row : rows) {
    const Chunk s = pair_member(row, "subject");
    const Chunk o = pair_member(row, "object");
    auto it = labels_.find({row.at("sample").get<std::string>(), s.start, s.end, o.start, o.end});
    out.push_back(cc_answer(it == labels_.end() ? std::string(no_relation) : it->second, score_));
  }
  return out;
}

SubprocessEndpoint::SubprocessEndpoint(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw Error("subprocess endpoint needs a command");
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw IoError(std::string("socketpair: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw IoError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(fds[1]);
  fd_ = fds[0];
  pid_ = pid;
  const auto hello = request({{"op", "hello"}});
  try {
    task_ = parse_model_task(hello.at("task").get<std::string>());
    labels_ = hello.value("label_set", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("endpoint handshake: ") + e.what());
  }
}

SubprocessEndpoint::~SubprocessEndpoint() {
  if (fd_ >= 0) {
    const std::string bye = "{\"op\":\"bye\"}\n";
    (void)::send(fd_, bye.data(), bye.size(), MSG_NOSIGNAL);
    ::shutdown(fd_, SHUT_WR);
    ::close(fd_);
  }
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::string SubprocessEndpoint::read_line() {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const auto n = ::read(fd_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error("endpoint process '" + argv_.front() + "' closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json SubprocessEndpoint::request(const nlohmann::json& message) {
  const std::string line = message.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) throw Error("endpoint process '" + argv_.front() + "' is not reading: " + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(read_line());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("endpoint sent malformed JSON: ") + e.what());
  }
  if (reply.contains("error")) throw Error("endpoint error: " + reply.at("error").get<std::string>());
  return reply;
}

std::vector<nlohmann::json> SubprocessEndpoint::infer(const std::vector<nlohmann::json>& rows) {
  const auto reply = request({{"op", "infer"}, {"task", to_string(task_)}, {"rows", rows}});
  if (!reply.contains("rows") || !reply.at("rows").is_array() || reply.at("rows").size() != rows.size()) {
    throw Error("endpoint returned " + std::to_string(reply.value("rows", nlohmann::json::array()).size()) +
                " rows for " + std::to_string(rows.size()));
  }
  return reply.at("rows").get<std::vector<nlohmann::json>>();
}

void serve_endpoint(ModelEndpoint& endpoint, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json reply;
    try {
      const auto msg = nlohmann::json::parse(line);
      const auto op = msg.value("op", "");
      if (op == "bye") break;
      if (op == "hello") {
        reply = {{"task", to_string(endpoint.task())}, {"label_set", endpoint.label_set()}};
      } else if (op == "infer") {
        if (msg.contains("task") && parse_model_task(msg.at("task").get<std::string>()) != endpoint.task()) {
          throw Error("task mismatch: endpoint serves " + std::string(to_string(endpoint.task())));
        }
        reply = {{"rows", endpoint.infer(msg.at("rows").get<std::vector<nlohmann::json>>())}};
      } else {
        throw Error("unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    out << reply.dump() << '\n' << std::flush;
  }
}

EndpointPtr endpoint_from_json(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  try {
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "gazetteer") {
      std::map<std::string, std::string> entries = spec.value("entries", std::map<std::string, std::string>{});
      if (spec.contains("corpus")) {
        for (const auto& d : load_corpus(resolve(base_dir, spec.at("corpus").get<std::string>()))) {
          for (const auto& e : d.entities) entries.emplace(e.surface, e.type);
        }
      }
      return std::make_shared<GazetteerEndpoint>(std::move(entries));
    }
    if (kind == "keyword") {
      std::vector<KeywordRule> rules;
      if (spec.contains("rules")) {
        for (const auto& r : spec.at("rules")) {
          rules.push_back({r.at("label"), r.at("subject_type"), r.at("object_type"),
                           r.value("between", std::vector<std::string>{}),
                           r.value("context", std::vector<std::string>{})});
        }
      } else {
        rules = default_keyword_rules();
      }
      return std::make_shared<KeywordEndpoint>(std::move(rules), spec.value("score", 0.9));
    }
    if (kind == "oracle") {
      const auto corpus = load_corpus(resolve(base_dir, spec.at("corpus").get<std::string>()));
      if (parse_model_task(spec.at("task").get<std::string>()) == ModelTask::ce) {
        return std::make_shared<OracleCeEndpoint>(corpus, spec.value("recall", 1.0),
                                                  spec.value("seed", std::uint64_t{0}),
                                                  spec.value("complement", false));
      }
      return std::make_shared<OracleCcEndpoint>(corpus, spec.value("score", 1.0));
    }
    if (kind == "subprocess") {
      return std::make_shared<SubprocessEndpoint>(spec.at("command").get<std::vector<std::string>>());
    }
    throw Error("unknown endpoint kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed endpoint spec: ") + e.what());
  }
}

std::map<std::string, EndpointPtr> endpoints_from_json(const nlohmann::json& doc,
                                                       const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error("endpoint bindings must be a JSON object");
  std::map<std::string, EndpointPtr> out;
  for (const auto& [key, spec] : doc.items()) out.emplace(key, endpoint_from_json(spec, base_dir));
  return out;
}

} // namespace kgflow
