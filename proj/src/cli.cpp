#include "kgflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "kgflow/corpus.hpp"
#include "kgflow/cost_model.hpp"
#include "kgflow/endpoint.hpp"
#include "kgflow/error.hpp"
#include "kgflow/gfl.hpp"
#include "kgflow/json_io.hpp"
#include "kgflow/ontology.hpp"
#include "kgflow/registry.hpp"
#include "kgflow/runtime.hpp"
#include "kgflow/scheduler.hpp"
#include "kgflow/sim.hpp"
#include "kgflow/triples.hpp"

namespace kgflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, fs::path RunConfig::*> path_keys{
    {"flowline", &RunConfig::flowline}, {"corpus", &RunConfig::corpus},
    {"ontology", &RunConfig::ontology}, {"endpoints", &RunConfig::endpoints},
    {"catalog", &RunConfig::catalog},   {"profile", &RunConfig::profile},
    {"plan", &RunConfig::plan},         {"observations", &RunConfig::observations},
    {"fit", &RunConfig::fit},           {"overlay", &RunConfig::overlay},
    {"predicted", &RunConfig::predicted}, {"gold", &RunConfig::gold},
    {"out", &RunConfig::output},        {"report", &RunConfig::report},
    {"trace", &RunConfig::trace},
};

const std::map<std::string, double RunConfig::*> number_keys{
    {"slice", &RunConfig::slice_rows},   {"rows", &RunConfig::corpus_rows},
    {"eta", &RunConfig::eta},            {"latency", &RunConfig::latency_s},
    {"bandwidth", &RunConfig::bandwidth_bps}, {"jitter", &RunConfig::jitter},
};

const std::map<std::string, int RunConfig::*> int_keys{
    {"random-plans", &RunConfig::random_plans},
    {"sentences", &RunConfig::sentences},
};

const std::map<std::string, bool RunConfig::*> bool_keys{
    {"pipelined", &RunConfig::pipelined},
    {"refine", &RunConfig::refine},
};

const std::map<std::string, std::string RunConfig::*> string_keys{
    {"namespace", &RunConfig::ns},
    {"weighting", &RunConfig::weighting},
};

void apply_layer(RunConfig& cfg, const json& doc, const fs::path& base) {
  if (!doc.is_object()) throw Error("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (auto it = path_keys.find(key); it != path_keys.end()) {
        fs::path p = value.get<std::string>();
        if (p.is_relative() && !base.empty()) p = base / p;
        cfg.*(it->second) = p;
      } else if (auto it = number_keys.find(key); it != number_keys.end()) {
        cfg.*(it->second) = value.get<double>();
      } else if (auto it = int_keys.find(key); it != int_keys.end()) {
        cfg.*(it->second) = value.get<int>();
      } else if (auto it = bool_keys.find(key); it != bool_keys.end()) {
        cfg.*(it->second) = value.get<bool>();
      } else if (auto it = string_keys.find(key); it != string_keys.end()) {
        cfg.*(it->second) = value.get<std::string>();
      } else if (key == "seed") {
        if (!value.is_number_integer() || value.get<long long>() < 0) throw Error("seed must be a non-negative integer");
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "etas") {
        cfg.etas = value.get<std::vector<double>>();
      } else {
        throw Error("unknown config key '" + key + "'");
      }
    } catch (const json::exception&) {
      throw Error("config key '" + key + "' has the wrong type");
    }
  }
}

void check_eta_range(double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    std::ostringstream msg;
    msg << "eta out of range: " << eta << " (expected 0 <= eta < 1)";
    throw Error(msg.str());
  }
}

void validate_config(const RunConfig& cfg) {
  check_eta_range(cfg.eta);
  if (cfg.etas.empty()) throw Error("etas must not be empty");
  for (double e : cfg.etas) check_eta_range(e);
  if (!(cfg.slice_rows > 0)) throw Error("slice must be positive");
  if (!(cfg.corpus_rows >= 0)) throw Error("rows must not be negative");
  if (!(cfg.latency_s >= 0)) throw Error("latency must not be negative");
  if (!(cfg.bandwidth_bps > 0)) throw Error("bandwidth must be positive");
  if (!(cfg.jitter >= 0)) throw Error("jitter must not be negative");
  if (cfg.random_plans < 1) throw Error("random-plans must be at least 1");
  if (cfg.sentences < 0) throw Error("sentences must not be negative");
  if (cfg.weighting != "relative" && cfg.weighting != "absolute") {
    throw Error("weighting must be 'relative' or 'absolute'");
  }
  if (!cfg.fit.empty() && !cfg.observations.empty()) throw Error("--fit and --observations are mutually exclusive");
}

// Options bound to private slots; only the ones given on the command line end
// up in the flags document.
class FlagSet {
public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto slot = std::make_shared<T>();
    auto* opt = app->add_option(flag, *slot, help);
    collectors_.push_back([opt, slot, key](json& doc) {
      if (opt->count() > 0) doc[key] = *slot;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key, bool value,
                    const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    collectors_.push_back([opt, key, value](json& doc) {
      if (opt->count() > 0) doc[key] = value;
    });
    return opt;
  }

  [[nodiscard]] json collect() const {
    json doc = json::object();
    for (const auto& c : collectors_) c(doc);
    return doc;
  }

private:
  std::vector<std::function<void(json&)>> collectors_;
};

void need(const fs::path& p, const char* flag) {
  if (p.empty()) throw Error(std::string("missing ") + flag);
}

void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.output.empty()) {
    out << text;
  } else {
    write_text_file(cfg.output, text);
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

NetworkParams network(const RunConfig& cfg) { return {cfg.latency_s, cfg.bandwidth_bps}; }

double corpus_rows(const RunConfig& cfg) { return cfg.corpus_rows > 0 ? cfg.corpus_rows : cfg.slice_rows; }

Flowline read_flowline(const fs::path& path) {
  try {
    return load_flowline(path);
  } catch (const gfl::ParseError& e) {
    throw Error(path.string() + ":" + e.what());
  }
}

TaskProfile read_profile(const RunConfig& cfg) {
  need(cfg.profile, "--profile");
  return profile_from_json(read_json_file(cfg.profile));
}

Catalog read_catalog(const RunConfig& cfg) {
  need(cfg.catalog, "--catalog (or KGFLOW_CATALOG)");
  return load_catalog(cfg.catalog);
}

std::optional<MakespanPriceFit> read_prior_fit(const RunConfig& cfg) {
  if (!cfg.fit.empty()) return makespan_fit_from_json(read_json_file(cfg.fit));
  if (!cfg.observations.empty()) return fit_price_makespan(observations_from_json(read_json_file(cfg.observations)));
  return std::nullopt;
}

std::size_t integral_slice(const RunConfig& cfg) {
  if (cfg.slice_rows != std::floor(cfg.slice_rows)) throw Error("slice must be a whole number of rows");
  return static_cast<std::size_t>(cfg.slice_rows);
}

int cmd_gfl(const std::string& action, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  need(cfg.flowline, "flowline file");
  const auto f = read_flowline(cfg.flowline);
  const auto report = validate(f, &Registry::builtin());
  for (const auto& w : report.warnings) err << cfg.flowline.string() << ": warning[" << w.code << "]: " << w.message << '\n';
  if (!report.ok()) {
    for (const auto& e : report.errors) err << cfg.flowline.string() << ": error[" << e.code << "]: " << e.message << '\n';
    return 1;
  }
  if (action == "check") {
    emit(cfg, dump({{"ok", true}, {"vertices", f.vertices.size()}, {"edges", f.edges.size()},
                    {"entry", f.entry}, {"exit", f.exit}}), out);
  } else if (action == "fmt") {
    emit(cfg, gfl::format(f), out);
  } else {
    emit(cfg, gfl::emit_dot(f), out);
  }
  return 0;
}

struct Loaded {
  Flowline flowline;
  Ontology ontology;
  RunResult result;
};

Loaded execute(const RunConfig& cfg, std::ostream& err) {
  need(cfg.flowline, "--flowline");
  need(cfg.corpus, "--corpus");
  need(cfg.endpoints, "--endpoints");
  Loaded l;
  l.flowline = read_flowline(cfg.flowline);
  if (!cfg.overlay.empty()) apply_config_overlay(l.flowline, read_json_file(cfg.overlay));
  if (!cfg.ontology.empty()) l.ontology = load_ontology(cfg.ontology);
  const auto corpus = load_corpus(cfg.corpus);
  const auto endpoints = endpoints_from_json(read_json_file(cfg.endpoints), cfg.endpoints.parent_path());
  RunOptions opt;
  opt.slice_rows = integral_slice(cfg);
  l.result = run_flowline(l.flowline, l.ontology, corpus, endpoints, opt);
  const auto& rep = l.result.report;
  err << "kgflow: " << rep.records << " records in " << rep.slices << " slices, " << l.result.triples.size()
      << " triples";
  if (!rep.dropped.empty()) err << ", " << rep.dropped.size() << " rows dropped";
  err << '\n';
  return l;
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto l = execute(cfg, err);
  emit(cfg, to_ntriples(l.result.triples, cfg.ns, &l.ontology), out);
  if (!cfg.report.empty()) write_text_file(cfg.report, dump(to_json(l.result.report)));
  return 0;
}

int cmd_profile(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto l = execute(cfg, err);
  emit(cfg, dump(to_json(profile_from_report(l.flowline, l.result.report))), out);
  if (!cfg.report.empty()) write_text_file(cfg.report, dump(to_json(l.result.report)));
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  need(cfg.predicted, "--predicted");
  need(cfg.gold, "--gold");
  const auto predicted = parse_ntriples(read_text_file(cfg.predicted), cfg.ns);
  const auto gold = cfg.gold.extension() == ".jsonl" ? gold_triples(load_corpus(cfg.gold))
                                                      : parse_ntriples(read_text_file(cfg.gold), cfg.ns);
  const auto prf = eval_prf(predicted, gold);
  emit(cfg, dump({{"tp", prf.counts.tp}, {"fp", prf.counts.fp}, {"fn", prf.counts.fn},
                  {"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}}), out);
  return 0;
}

int cmd_fit_price(const RunConfig& cfg, std::ostream& out) {
  const auto catalog = read_catalog(cfg);
  const auto weighting = cfg.weighting == "absolute" ? PriceFitWeighting::absolute : PriceFitWeighting::relative;
  const auto fit = fit_price_linear(catalog.vm_types, weighting);
  json rows = json::array();
  for (std::size_t i = 0; i < catalog.vm_types.size(); ++i) {
    const auto& t = catalog.vm_types[i];
    rows.push_back({{"name", t.name}, {"cpu", t.cpu_cores}, {"gpu", t.gpu_cards}, {"quoted", t.unit_price},
                    {"fitted", vm_price(t.cpu_cores, t.gpu_cards, fit)}, {"error_pct", fit.relative_errors[i]}});
  }
  emit(cfg, dump({{"theta1", fit.theta1}, {"theta2", fit.theta2}, {"weighting", cfg.weighting}, {"rows", rows}}),
       out);
  return 0;
}

int cmd_fit_g(const RunConfig& cfg, std::ostream& out) {
  need(cfg.observations, "--observations");
  const auto fit = fit_price_makespan(observations_from_json(read_json_file(cfg.observations)));
  auto doc = to_json(fit);
  doc["eta"] = cfg.eta;
  doc["x0"] = optimal_unit_price(fit, cfg.eta);
  emit(cfg, dump(doc), out);
  return 0;
}

int cmd_schedule(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  need(cfg.flowline, "--flowline");
  const auto f = read_flowline(cfg.flowline);
  const auto profile = read_profile(cfg);
  const auto catalog = read_catalog(cfg);
  ScheduleOptions opt;
  opt.eta = cfg.eta;
  opt.net = network(cfg);
  opt.slice_rows = cfg.slice_rows;
  opt.corpus_rows = corpus_rows(cfg);
  opt.prior_fit = read_prior_fit(cfg);
  opt.refine = cfg.refine;
  const auto plan = schedule(f, profile, catalog, opt);
  std::string proc;
  for (const auto& [type, count] : plan.procurement()) {
    if (!proc.empty()) proc += " + ";
    proc += std::to_string(count) + "x " + type;
  }
  err << "kgflow: procured " << proc << " at " << plan.unit_price() << "/h\n";
  emit(cfg, dump(to_json(plan)), out);
  return 0;
}

SimConfig sim_config(const RunConfig& cfg) {
  SimConfig sc;
  sc.net = network(cfg);
  sc.slice_rows = cfg.slice_rows;
  sc.corpus_rows = corpus_rows(cfg);
  sc.jitter = cfg.jitter;
  sc.seed = cfg.seed;
  sc.discipline = cfg.pipelined ? SimDiscipline::pipelined : SimDiscipline::serial;
  return sc;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  need(cfg.plan, "--plan");
  need(cfg.flowline, "--flowline");
  const auto plan = plan_from_json(read_json_file(cfg.plan));
  const auto f = read_flowline(cfg.flowline);
  const auto result = simulate(plan, f, read_profile(cfg), sim_config(cfg));
  if (!cfg.trace.empty()) write_text_file(cfg.trace, dump(chrome_trace(result, f)));
  emit(cfg, dump(to_json(result)), out);
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  need(cfg.flowline, "--flowline");
  const auto f = read_flowline(cfg.flowline);
  SweepConfig sc;
  sc.sim = sim_config(cfg);
  sc.random_plans = cfg.random_plans;
  sc.prior_fit = read_prior_fit(cfg);
  emit(cfg, to_csv(sweep_eta(f, read_profile(cfg), read_catalog(cfg), cfg.etas, sc)), out);
  return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  emit(cfg, to_jsonl(synthetic_corpus(static_cast<std::size_t>(cfg.sentences), cfg.seed)), out);
  if (!cfg.ontology.empty()) write_text_file(cfg.ontology, dump(to_json(synthetic_ontology())));
  return 0;
}

} // namespace

RunConfig load_config(const json& flags, const std::optional<fs::path>& config_file) {
  RunConfig cfg;
  if (const char* env = std::getenv("KGFLOW_CATALOG"); env != nullptr && *env != '\0') cfg.catalog = env;
  if (config_file) apply_layer(cfg, read_json_file(*config_file), config_file->parent_path());
  apply_layer(cfg, flags, {});
  validate_config(cfg);
  return cfg;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph construction flowlines: GFL tooling, runs, fitting, scheduling, simulation"};
  app.name("kgflow");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default option values");

  FlagSet flags;
  auto* gfl_cmd = app.add_subcommand("gfl", "GFL tooling");
  gfl_cmd->require_subcommand(1);
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"check", "Parse and validate a flowline"},
           {"fmt", "Print the canonical GFL text"},
           {"dot", "Print a Graphviz rendering"}}) {
    auto* sub = gfl_cmd->add_subcommand(name, help);
    flags.option<std::string>(sub, "flowline", "flowline", "Flowline (.gfl or JSON)");
    flags.option<std::string>(sub, "-o,--out", "out", "Output file (default: stdout)");
  }

  auto* run = app.add_subcommand("run", "Run a flowline over a corpus and print N-Triples");
  auto* profile = app.add_subcommand("profile", "Run a flowline and print the measured task profile");
  for (auto* sub : {run, profile}) {
    flags.option<std::string>(sub, "--flowline", "flowline", "Flowline (.gfl or JSON)");
    flags.option<std::string>(sub, "--corpus", "corpus", "Corpus (JSON lines)");
    flags.option<std::string>(sub, "--endpoints", "endpoints", "Endpoint bindings (JSON)");
    flags.option<std::string>(sub, "--ontology", "ontology", "Ontology (JSON)");
    flags.option<std::string>(sub, "--overlay", "overlay", "Per-task config overlay (JSON)");
    flags.option<std::string>(sub, "--report", "report", "Write the run report here");
    flags.option<double>(sub, "--slice", "slice", "Rows per data slice");
    flags.option<std::string>(sub, "-o,--out", "out", "Output file (default: stdout)");
  }
  flags.option<std::string>(run, "--namespace", "namespace", "IRI namespace");

  auto* eval = app.add_subcommand("eval", "Precision, recall and F1 of predicted triples");
  flags.option<std::string>(eval, "--predicted", "predicted", "Predicted triples (.nt)");
  flags.option<std::string>(eval, "--gold", "gold", "Gold triples (.nt) or annotated corpus (.jsonl)");
  flags.option<std::string>(eval, "--namespace", "namespace", "IRI namespace");
  flags.option<std::string>(eval, "-o,--out", "out", "Output file (default: stdout)");

  auto* fit_price = app.add_subcommand("fit-price", "Fit per-core and per-card prices to a catalog");
  flags.option<std::string>(fit_price, "--catalog", "catalog", "VM catalog (JSON)");
  flags.option<std::string>(fit_price, "--weighting", "weighting", "relative | absolute");
  flags.option<std::string>(fit_price, "-o,--out", "out", "Output file (default: stdout)");

  auto* fit_g = app.add_subcommand("fit-g", "Fit the makespan-price curve and report the optimal price");
  flags.option<std::string>(fit_g, "--observations", "observations", "(price, makespan) observations (JSON)");
  flags.option<double>(fit_g, "--eta", "eta", "Weight on computation cost, in [0, 1)");
  flags.option<std::string>(fit_g, "-o,--out", "out", "Output file (default: stdout)");

  auto* sched = app.add_subcommand("schedule", "Procure VMs and partition a flowline");
  auto* sim = app.add_subcommand("simulate", "Simulate a plan over a corpus");
  auto* sweep = app.add_subcommand("sweep", "Compare schedulers across eta values (CSV)");
  for (auto* sub : {sched, sim, sweep}) {
    flags.option<std::string>(sub, "--flowline", "flowline", "Flowline (.gfl or JSON)");
    flags.option<std::string>(sub, "--profile", "profile", "Task profile (JSON)");
    flags.option<double>(sub, "--rows", "rows", "Corpus rows (default: one slice)");
    flags.option<double>(sub, "--slice", "slice", "Rows per data slice");
    flags.option<double>(sub, "--latency", "latency", "Network latency, seconds");
    flags.option<double>(sub, "--bandwidth", "bandwidth", "Network bandwidth, bytes per second");
    flags.option<std::string>(sub, "-o,--out", "out", "Output file (default: stdout)");
  }
  for (auto* sub : {sched, sweep}) {
    flags.option<std::string>(sub, "--catalog", "catalog", "VM catalog (JSON)");
    flags.option<std::string>(sub, "--observations", "observations", "Fit the price curve on these first");
    flags.option<std::string>(sub, "--fit", "fit", "Use this price-curve fit (output of fit-g)");
  }
  flags.option<double>(sched, "--eta", "eta", "Weight on computation cost, in [0, 1)");
  flags.flag(sched, "--no-refine", "refine", false, "Skip local improvement after greedy placement");
  for (auto* sub : {sim, sweep}) {
    flags.option<double>(sub, "--jitter", "jitter", "Std-dev of multiplicative duration noise");
    flags.option<std::uint64_t>(sub, "--seed", "seed", "Random seed");
    flags.flag(sub, "--pipelined", "pipelined", true, "Let slices overlap across tasks");
  }
  flags.option<std::string>(sim, "--plan", "plan", "Plan (output of schedule)");
  flags.option<std::string>(sim, "--trace", "trace", "Write a chrome://tracing event list here");
  flags.option<std::vector<double>>(sweep, "--etas", "etas", "Comma-separated eta values")->delimiter(',');
  flags.option<int>(sweep, "--random-plans", "random-plans", "Random baseline plans per eta");

  auto* synth = app.add_subcommand("synth", "Write a synthetic annotated corpus");
  flags.option<int>(synth, "--sentences", "sentences", "Number of sentences");
  flags.option<std::uint64_t>(synth, "--seed", "seed", "Random seed");
  flags.option<std::string>(synth, "--ontology", "ontology", "Also write the matching ontology here");
  flags.option<std::string>(synth, "-o,--out", "out", "Output file (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto first = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    if (first != args.end() && app.get_subcommand_no_throw(*first) == nullptr) {
      err << "kgflow: unknown subcommand '" << *first << "'\n\n" << app.help();
      return 1;
    }
    err << "kgflow: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    std::optional<fs::path> config_file;
    if (!config_path.empty()) config_file = config_path;
    auto cfg = load_config(flags.collect(), config_file);
    auto* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (sub == gfl_cmd) {
      const auto action = gfl_cmd->get_subcommands().front()->get_name();
      cfg.command += " " + action;
      return cmd_gfl(action, cfg, out, err);
    }
    if (sub == run) return cmd_run(cfg, out, err);
    if (sub == profile) return cmd_profile(cfg, out, err);
    if (sub == eval) return cmd_eval(cfg, out);
    if (sub == fit_price) return cmd_fit_price(cfg, out);
    if (sub == fit_g) return cmd_fit_g(cfg, out);
    if (sub == sched) return cmd_schedule(cfg, out, err);
    if (sub == sim) return cmd_simulate(cfg, out);
    if (sub == sweep) return cmd_sweep(cfg, out);
    return cmd_synth(cfg, out);
  } catch (const IoError& e) {
    err << "kgflow: io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "kgflow: error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace kgflow::cli
