#include "kgflow/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kgflow/error.hpp"
#include "kgflow/predicate.hpp"

namespace kgflow {

namespace {

// One output row as an edit of its parent input row.
struct Produced {
  std::size_t input = 0;
  std::size_t row = 0;
  nlohmann::json set = nlohmann::json::object();
  std::vector<std::string> erase{};
};

struct OpEnv {
  const TaskNode& node;
  const OperatorContext& ctx;
  const std::map<std::string, std::size_t>* row_order = nullptr;
};

std::string resolve(const OpEnv& env, const std::string& name) {
  if (env.ctx.aliases == nullptr) return name;
  auto it = env.ctx.aliases->find(name);
  return it == env.ctx.aliases->end() ? name : it->second;
}

void row_failure(const OpEnv& env, const std::string& row_id, const std::string& message) {
  if (env.node.config.value("on_error", "drop") == "fail") {
    throw Error("task '" + env.node.id + "' row '" + row_id + "': " + message);
  }
  if (env.ctx.issues != nullptr) env.ctx.issues->push_back({env.node.id, row_id, message});
}

const nlohmann::json& column(const Record& r, const std::string& name) {
  auto it = r.columns.find(name);
  if (it == r.columns.end()) throw Error("missing column '" + name + "'");
  return *it;
}

template <typename F>
void each_row(const std::vector<DataSlice>& inputs, F&& f) {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t r = 0; r < inputs[i].records.size(); ++r) f(i, r, inputs[i].records[r]);
  }
}

std::vector<Produced> pass_through(const std::vector<DataSlice>& inputs) {
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record&) { out.push_back({i, r}); });
  return out;
}

// Stable sort by the position of each row's sample in the slice.
void order_by_sample(std::vector<Produced>& out, const std::vector<DataSlice>& inputs, const OpEnv& env) {
  if (env.row_order == nullptr) return;
  auto pos = [&](const Produced& p) {
    auto it = env.row_order->find(inputs[p.input].records[p.row].row_id);
    return it == env.row_order->end() ? env.row_order->size() : it->second;
  };
  std::stable_sort(out.begin(), out.end(), [&](const Produced& a, const Produced& b) { return pos(a) < pos(b); });
}

std::vector<Produced> set_filter(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  const auto& cfg = env.node.config;
  const auto col = resolve(env, cfg.value("column", default_target_column(env.node.function)));
  const bool has_keep = cfg.contains("keep");
  const auto keep = cfg.value("keep", nlohmann::json::array());
  const auto drop = cfg.value("drop", nlohmann::json::array());
  auto listed = [](const nlohmann::json& list, const nlohmann::json& v) {
    return std::find(list.begin(), list.end(), v) != list.end();
  };
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      const auto& v = column(rec, col);
      if ((!has_keep || listed(keep, v)) && !listed(drop, v)) out.push_back({i, r});
    } catch (const Error& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  return out;
}

std::vector<Produced> score_filter(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  const auto col = resolve(env, env.node.config.value("column", std::string(col::score)));
  const double threshold = env.node.config.value("threshold", 0.5);
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      const auto& v = column(rec, col);
      if (!v.is_number()) throw Error("score is not a number");
      if (v.get<double>() > threshold) out.push_back({i, r});
    } catch (const Error& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  return out;
}

std::vector<Produced> predicate_filter(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  if (!env.node.config.contains("predicate")) return pass_through(inputs);
  const auto expr = predicate::Expr::parse(env.node.config.at("predicate").get<std::string>());
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    auto lookup = [&](std::string_view name) -> std::optional<nlohmann::json> {
      if (env.ctx.flowline != nullptr) {
        auto b = env.ctx.flowline->bindings.find(std::string(name));
        if (b != env.ctx.flowline->bindings.end()) return b->second;
      }
      auto it = rec.columns.find(resolve(env, std::string(name)));
      if (it == rec.columns.end()) return std::nullopt;
      return *it;
    };
    try {
      if (expr.evaluate(lookup)) out.push_back({i, r});
    } catch (const Error& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  return out;
}

std::vector<Produced> mapper(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  const auto& cfg = env.node.config;
  const auto col = resolve(env, cfg.value("column", default_target_column(env.node.function)));
  const auto table = cfg.value("table", nlohmann::json::object());
  if (!table.is_object()) throw Error("task '" + env.node.id + "': mapper table must be an object");
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      const auto& v = column(rec, col);
      if (!v.is_string()) throw Error("column '" + col + "' is not a label");
      auto hit = table.find(v.get<std::string>());
      if (hit != table.end()) {
        out.push_back({i, r, {{col, *hit}}});
      } else if (cfg.contains("default")) {
        out.push_back({i, r, {{col, cfg.at("default")}}});
      } else {
        throw Error("no mapping for '" + v.get<std::string>() + "'");
      }
    } catch (const Error& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  return out;
}

std::vector<Produced> permutate(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  // Entities grouped by sample, in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> groups;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      chunk_from_json(column(rec, std::string(col::entity)));
      if (!column(rec, std::string(col::entity_type)).is_string()) throw Error("entity type is not a label");
    } catch (const std::exception& e) {
      row_failure(env, rec.row_id, e.what());
      return;
    }
    auto [it, fresh] = groups.try_emplace(rec.row_id);
    if (fresh) order.push_back(rec.row_id);
    it->second.emplace_back(i, r);
  });
  std::vector<Produced> out;
  for (const auto& id : order) {
    const auto& members = groups.at(id);
    for (const auto& [si, sr] : members) {
      for (const auto& [oi, orow] : members) {
        if (si == oi && sr == orow) continue;
        const auto& s = inputs[si].records[sr];
        const auto& o = inputs[oi].records[orow];
        Produced p{si, sr};
        p.set[std::string(col::entity_pair)] = {{"subject", s.columns.at(std::string(col::entity))},
                                                {"object", o.columns.at(std::string(col::entity))}};
        p.set[std::string(col::entity_type_pair)] = {s.columns.at(std::string(col::entity_type)),
                                                     o.columns.at(std::string(col::entity_type))};
        p.erase = {std::string(col::entity), std::string(col::entity_type), std::string(col::score)};
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::vector<Produced> triple(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      const auto& rel = column(rec, std::string(col::relation));
      if (!rel.is_string()) throw Error("relation is not a label");
      const auto label = rel.get<std::string>();
      if (label == no_relation) return;
      const auto& pair = column(rec, std::string(col::entity_pair));
      const Chunk s = chunk_from_json(pair.at("subject"));
      const Chunk o = chunk_from_json(pair.at("object"));
      out.push_back({i, r, {{std::string(col::triple), {canonical_name(s.surface), label, canonical_name(o.surface)}}}});
    } catch (const std::exception& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  return out;
}

void check_aligned(const std::vector<DataSlice>& inputs, const TaskNode& node) {
  if (inputs.empty()) throw Error("task '" + node.id + "' has no inputs");
  const auto n = inputs.front().records.size();
  for (std::size_t j = 1; j < inputs.size(); ++j) {
    if (inputs[j].records.size() != n) {
      throw Error("task '" + node.id + "': misaligned inputs (" + std::to_string(n) + " vs " +
                  std::to_string(inputs[j].records.size()) + " rows)");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = inputs.front().records[i];
      const auto& b = inputs[j].records[i];
      const auto key = std::string(col::entity_pair);
      if (a.row_id != b.row_id || a.columns.value(key, nlohmann::json()) != b.columns.value(key, nlohmann::json())) {
        throw Error("task '" + node.id + "': misaligned inputs at row " + std::to_string(i));
      }
    }
  }
}

std::vector<Produced> vote(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  check_aligned(inputs, env.node);
  std::vector<std::vector<std::string>> labels;
  for (const auto& in : inputs) {
    auto& l = labels.emplace_back();
    for (const auto& rec : in.records) l.push_back(column(rec, std::string(col::relation)).get<std::string>());
  }
  const auto winners = ensemble_vote(labels);
  std::vector<Produced> out;
  for (std::size_t i = 0; i < winners.size(); ++i) out.push_back({0, i, {{std::string(col::relation), winners[i]}}});
  return out;
}

std::vector<Produced> score_ensemble(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  check_aligned(inputs, env.node);
  const auto& cfg = env.node.config;
  ScoreEnsembleOptions opt;
  opt.weights = cfg.value("weights", std::vector<double>{});
  opt.threshold = cfg.value("threshold", 0.5);
  opt.strict = cfg.value("strict", false);
  if (env.ctx.ontology != nullptr && !(env.ctx.ontology->relations.empty() && env.ctx.ontology->attributes.empty())) {
    auto allowed = env.ctx.ontology->relation_names();
    for (const auto& a : env.ctx.ontology->attribute_names()) allowed.insert(a);
    allowed.insert(std::string(no_relation));
    opt.allowed_labels = std::move(allowed);
  }
  std::vector<std::vector<ScoreMap>> scores;
  for (const auto& in : inputs) {
    auto& s = scores.emplace_back();
    for (const auto& rec : in.records) s.push_back(column(rec, std::string(col::scores)).get<ScoreMap>());
  }
  const auto winners = ensemble_score(scores, opt);
  std::vector<double> weights = opt.weights;
  if (weights.empty()) weights.assign(inputs.size(), 1.0 / static_cast<double>(inputs.size()));
  std::vector<Produced> out;
  for (std::size_t i = 0; i < winners.size(); ++i) {
    Produced p{0, i};
    if (winners[i]) {
      double sum = 0.0;
      for (std::size_t j = 0; j < scores.size(); ++j) {
        auto it = scores[j][i].find(*winners[i]);
        if (it != scores[j][i].end()) sum += weights[j] * it->second;
      }
      p.set[std::string(col::relation)] = *winners[i];
      p.set[std::string(col::score)] = std::clamp(sum, 0.0, 1.0);
    } else {
      p.set[std::string(col::relation)] = no_relation;
      p.set[std::string(col::score)] = 0.0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Produced> chunk_union(const std::vector<DataSlice>& inputs, const OpEnv& env) {
  std::set<std::pair<std::string, Chunk>> seen;
  std::vector<Produced> out;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    try {
      Chunk c = chunk_from_json(column(rec, std::string(col::entity)));
      c.type = column(rec, std::string(col::entity_type)).get<std::string>();
      if (seen.emplace(rec.row_id, c).second) out.push_back({i, r});
    } catch (const std::exception& e) {
      row_failure(env, rec.row_id, e.what());
    }
  });
  order_by_sample(out, inputs, env);
  return out;
}

std::vector<Produced> run_op(const TaskNode& node, const std::vector<DataSlice>& inputs, const OperatorContext& ctx,
                             const std::map<std::string, std::size_t>* row_order) {
  if (node.is_model()) throw Error("task '" + node.id + "' is a model and needs an endpoint");
  const OpEnv env{node, ctx, row_order};
  const auto& f = node.function;
  if (f == "data" || f == "start" || f == "end") return pass_through(inputs);
  if (f == "entity_type_filter" || f == "relation_filter") return set_filter(inputs, env);
  if (f == "score_filter") return score_filter(inputs, env);
  if (f == "filter") return predicate_filter(inputs, env);
  if (f == "mapper") return mapper(inputs, env);
  if (f == "permutate") return permutate(inputs, env);
  if (f == "triple") return triple(inputs, env);
  if (f == "vote") return vote(inputs, env);
  if (f == "score_ensemble") return score_ensemble(inputs, env);
  if (f == "chunk_union") return chunk_union(inputs, env);
  if (f == "merge") {
    auto out = pass_through(inputs);
    order_by_sample(out, inputs, env);
    return out;
  }
  throw Error("task '" + node.id + "': no implementation for operator '" + f + "'");
}

Record materialise(const Record& parent, const Produced& p) {
  Record r = parent;
  for (const auto& key : p.erase) r.columns.erase(key);
  for (const auto& [key, value] : p.set.items()) r.columns[key] = value;
  return r;
}

DataSlice collect(const std::vector<DataSlice>& inputs, const std::vector<Produced>& produced) {
  DataSlice out;
  if (!inputs.empty()) out.index = inputs.front().index;
  for (const auto& p : produced) out.records.push_back(materialise(inputs[p.input].records[p.row], p));
  return out;
}

// Model calls: one request per slice and task.
std::vector<Produced> run_model(const TaskNode& node, ModelEndpoint& endpoint, const std::vector<DataSlice>& inputs,
                                const OperatorContext& ctx) {
  const OpEnv env{node, ctx};
  std::vector<std::pair<std::size_t, std::size_t>> index;
  std::vector<nlohmann::json> rows;
  each_row(inputs, [&](std::size_t i, std::size_t r, const Record& rec) {
    index.emplace_back(i, r);
    auto row = rec.columns;
    row["row_id"] = rec.row_id;
    rows.push_back(std::move(row));
  });
  if (rows.empty()) return {};
  std::vector<nlohmann::json> answers;
  try {
    answers = endpoint.infer(rows);
  } catch (const std::exception& e) {
    throw Error("task '" + node.id + "': endpoint failure: " + e.what());
  }
  if (answers.size() != rows.size()) {
    throw Error("task '" + node.id + "': endpoint answered " + std::to_string(answers.size()) + " of " +
                std::to_string(rows.size()) + " rows");
  }
  std::vector<Produced> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto [i, r] = index[k];
    const auto& rec = inputs[i].records[r];
    const auto& a = answers[k];
    try {
      if (node.kind == TaskKind::model_ce) {
        const auto sample = rows[k].at(std::string(col::sample)).get<std::string>();
        for (const auto& cj : a.at("chunks")) {
          const Chunk c = chunk_from_json(cj);
          if (c.end > sample.size() || sample.compare(c.start, c.end - c.start, c.surface) != 0) {
            row_failure(env, rec.row_id, "chunk '" + c.surface + "' does not match the sample at its offsets");
            continue;
          }
          Produced p{i, r};
          p.set[std::string(col::entity)] = to_json(c);
          p.set[std::string(col::entity_type)] = c.type;
          p.set[std::string(col::score)] = c.score;
          out.push_back(std::move(p));
        }
      } else {
        const auto label = a.at("label").get<std::string>();
        const double score = a.value("score", 1.0);
        if (score < 0.0 || score > 1.0) throw Error("score outside [0, 1]");
        Produced p{i, r};
        p.set[std::string(col::relation)] = label;
        p.set[std::string(col::score)] = score;
        p.set[std::string(col::scores)] = a.value("scores", nlohmann::json{{label, score}});
        out.push_back(std::move(p));
      }
    } catch (const std::exception& e) {
      row_failure(env, rec.row_id, std::string("bad endpoint answer: ") + e.what());
    }
  }
  return out;
}

} // namespace

DataSlice apply_operator(const TaskNode& node, const DataSlice& input, const OperatorContext& ctx) {
  const std::vector<DataSlice> inputs{input};
  return collect(inputs, run_op(node, inputs, ctx, nullptr));
}

DataSlice apply_integrator(const TaskNode& node, const std::vector<DataSlice>& inputs, const OperatorContext& ctx) {
  return collect(inputs, run_op(node, inputs, ctx, nullptr));
}

std::vector<std::string> ensemble_vote(const std::vector<std::vector<std::string>>& labels) {
  if (labels.empty()) throw Error("vote needs at least one classifier");
  const auto n = labels.front().size();
  for (const auto& l : labels) {
    if (l.size() != n) throw Error("vote: classifiers disagree on the row count");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::size_t> count;
    for (const auto& l : labels) ++count[l[i]];
    std::size_t best = 0;
    for (const auto& [label, c] : count) best = std::max(best, c);
    for (const auto& l : labels) {
      if (count[l[i]] == best) {
        out.push_back(l[i]);
        break;
      }
    }
  }
  return out;
}

std::vector<std::optional<std::string>> ensemble_score(const std::vector<std::vector<ScoreMap>>& scores,
                                                       const ScoreEnsembleOptions& options) {
  if (scores.empty()) throw Error("score ensemble needs at least one classifier");
  const auto m = scores.size();
  std::vector<double> w = options.weights;
  if (w.empty()) w.assign(m, 1.0 / static_cast<double>(m));
  if (w.size() != m) throw Error("score ensemble: " + std::to_string(w.size()) + " weights for " + std::to_string(m) + " classifiers");
  if (std::any_of(w.begin(), w.end(), [](double x) { return x < 0.0; }) ||
      std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) > 1e-9) {
    throw Error("score ensemble weights must be non-negative and sum to 1");
  }
  if (options.threshold < 0.0 || options.threshold > 1.0) throw Error("score ensemble threshold must lie in [0, 1]");
  const auto n = scores.front().size();
  for (const auto& s : scores) {
    if (s.size() != n) throw Error("score ensemble: classifiers disagree on the row count");
  }
  std::vector<std::optional<std::string>> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScoreMap total;
    for (std::size_t j = 0; j < m; ++j) {
      for (const auto& [label, p] : scores[j][i]) {
        if (options.allowed_labels && !options.allowed_labels->contains(label)) {
          throw Error("label '" + label + "' is not in the merged ontology");
        }
        total[label] += w[j] * p;
      }
    }
    if (total.empty()) {
      out.emplace_back();
      continue;
    }
    // Highest weighted sum; the map order makes ties go to the smallest label.
    auto best = total.begin();
    for (auto it = total.begin(); it != total.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto& k = best->first;
    std::size_t above = 0;
    for (std::size_t j = 0; j < m; ++j) {
      auto it = scores[j][i].find(k);
      if (it != scores[j][i].end() && it->second > options.threshold) ++above;
    }
    const bool accept = options.strict ? above == m : above > 0;
    if (accept) {
      out.emplace_back(k);
    } else {
      out.emplace_back();
    }
  }
  return out;
}

std::vector<Chunk> chunk_ensemble(const std::vector<std::vector<Chunk>>& sets) {
  std::set<Chunk> seen;
  std::vector<Chunk> out;
  for (const auto& s : sets) {
    for (const auto& c : s) {
      if (seen.insert(c).second) out.push_back(c);
    }
  }
  return out;
}

RunResult run_flowline(const Flowline& flowline, const Ontology& ontology, const Corpus& corpus,
                       const EndpointMap& endpoints, const RunOptions& options) {
  if (options.slice_rows == 0) throw Error("slice size must be positive");
  const Registry& registry = options.registry != nullptr ? *options.registry : Registry::builtin();
  const auto report = validate(flowline, &registry);
  if (!report.ok()) throw Error("invalid flowline: " + report.summary());
  const auto order = *flowline.topological_order();
  const auto aliases = column_aliases(flowline, registry);

  std::map<std::string, ModelEndpoint*> bound;
  std::map<std::string, std::set<std::string>> required;
  for (const auto& v : flowline.vertices) {
    required[v.id] = input_columns(v, registry, aliases);
    if (!v.is_model()) continue;
    auto it = endpoints.find(v.id);
    if (it == endpoints.end()) it = endpoints.find(v.function);
    if (it == endpoints.end() || !it->second) throw Error("no endpoint bound to task '" + v.id + "'");
    const auto want = v.kind == TaskKind::model_cc ? ModelTask::cc : ModelTask::ce;
    if (it->second->task() != want) {
      throw Error("task '" + v.id + "' is " + std::string(to_string(v.kind)) + " but its endpoint serves " +
                  std::string(to_string(it->second->task())));
    }
    bound[v.id] = it->second.get();
  }

  RunResult result;
  auto& rep = result.report;
  rep.records = corpus.size();
  for (const auto& v : flowline.vertices) rep.tasks[v.id];
  for (const auto& e : flowline.edges) rep.edges[{e.from, e.to}];

  OperatorContext ctx{&flowline, &aliases, &ontology, &rep.dropped};
  for (std::size_t first = 0; first < corpus.size(); first += options.slice_rows) {
    const auto last = std::min(corpus.size(), first + options.slice_rows);
    DataSlice source;
    source.index = rep.slices++;
    std::map<std::string, std::size_t> row_order;
    for (std::size_t i = first; i < last; ++i) {
      source.records.push_back({corpus[i].id, {{std::string(col::sample), corpus[i].text}}});
      row_order.emplace(corpus[i].id, i - first);
    }

    std::map<std::string, DataSlice> outputs;
    for (const auto& id : order) {
      const TaskNode& v = *flowline.find(id);
      const auto& need = required.at(id);
      std::vector<DataSlice> inputs;
      auto project = [&](const DataSlice& from, const std::string& edge_name) {
        DataSlice in;
        in.index = source.index;
        in.projected_columns = need;
        for (const auto& rec : from.records) {
          if (need.empty()) {
            in.records.push_back(rec);
            continue;
          }
          Record view{rec.row_id};
          for (const auto& c : need) {
            auto it = rec.columns.find(c);
            if (it == rec.columns.end()) throw Error("schema error: " + edge_name + " lacks column '" + c + "'");
            view.columns[c] = *it;
          }
          in.records.push_back(std::move(view));
        }
        return in;
      };
      std::vector<const DataSlice*> parents;
      if (id == flowline.entry) {
        inputs.push_back(project(source, "corpus -> '" + id + "'"));
        parents.push_back(&source);
      } else {
        for (const auto& u : flowline.predecessors(id)) {
          const auto& from = outputs.at(u);
          inputs.push_back(project(from, "edge '" + u + "' -> '" + id + "'"));
          parents.push_back(&from);
          auto& es = rep.edges[{u, id}];
          es.rows += inputs.back().records.size();
          for (const auto& rec : inputs.back().records) es.bytes += rec.columns.dump().size() + rec.row_id.size();
        }
      }

      const auto t0 = std::chrono::steady_clock::now();
      const auto produced = v.is_model() ? run_model(v, *bound.at(id), inputs, ctx) : run_op(v, inputs, ctx, &row_order);
      const auto t1 = std::chrono::steady_clock::now();

      DataSlice out;
      out.index = source.index;
      for (const auto& p : produced) out.records.push_back(materialise(parents[p.input]->records[p.row], p));
      auto& ts = rep.tasks[id];
      ts.seconds += std::chrono::duration<double>(t1 - t0).count();
      for (const auto& in : inputs) ts.rows_in += in.records.size();
      ts.rows_out += out.records.size();
      if (v.function == "triple") {
        for (const auto& rec : out.records) {
          const auto& t = rec.columns.at(std::string(col::triple));
          result.triples.insert({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
        }
      }
      outputs[id] = std::move(out);
    }
  }
  return result;
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json doc{{"records", report.records}, {"slices", report.slices}};
  doc["tasks"] = nlohmann::json::object();
  for (const auto& [id, t] : report.tasks) {
    doc["tasks"][id] = {{"seconds", t.seconds}, {"rows_in", t.rows_in}, {"rows_out", t.rows_out}};
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& [key, e] : report.edges) {
    doc["edges"].push_back({{"from", key.first}, {"to", key.second}, {"rows", e.rows}, {"bytes", e.bytes}});
  }
  doc["dropped"] = nlohmann::json::array();
  for (const auto& d : report.dropped) {
    doc["dropped"].push_back({{"task", d.task}, {"row_id", d.row_id}, {"message", d.message}});
  }
  return doc;
}

TaskProfile profile_from_report(const Flowline& flowline, const RunReport& report) {
  TaskProfile p;
  const double n = report.slices == 0 ? 0.0 : static_cast<double>(report.slices);
  for (const auto& v : flowline.vertices) {
    auto it = report.tasks.find(v.id);
    p.vertex_weights[v.id] = (n == 0.0 || it == report.tasks.end()) ? 0.0 : it->second.seconds / n;
  }
  for (const auto& e : flowline.edges) {
    auto it = report.edges.find({e.from, e.to});
    p.edge_payloads[{e.from, e.to}] =
        (n == 0.0 || it == report.edges.end()) ? 0.0 : static_cast<double>(it->second.bytes) / n;
  }
  return p;
}

void apply_config_overlay(Flowline& flowline, const nlohmann::json& overlay) {
  if (!overlay.is_object()) throw Error("config overlay must be a JSON object");
  for (const auto& [id, cfg] : overlay.items()) {
    auto it = std::find_if(flowline.vertices.begin(), flowline.vertices.end(),
                           [&](const TaskNode& v) { return v.id == id; });
    if (it == flowline.vertices.end()) throw Error("config overlay names unknown task '" + id + "'");
    if (!cfg.is_object()) throw Error("config for task '" + id + "' must be an object");
    it->config.update(cfg);
  }
}

} // namespace kgflow
