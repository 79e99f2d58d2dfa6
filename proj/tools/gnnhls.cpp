// gnnhls: fixtures, reference / streaming runs, cycle simulation, analytic
// model, trace characterization and baseline comparison.
//
// Exit codes: 0 ok, 1 a requested check failed, 2 bad input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnnhls/gnnhls.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gnnhls;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadInput = 2;

// Every field is optional so a config file and flags can be layered.
struct RunConfig {
  std::optional<std::string> model;
  std::optional<std::string> dims;
  std::optional<std::string> graph;
  std::optional<std::string> summary;
  std::optional<std::size_t> n;
  std::optional<double> avg_degree;
  std::optional<std::string> topology;
  std::optional<std::string> params;
  std::optional<std::size_t> cus;
  std::optional<double> freq_mhz;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> sample;
  std::optional<std::uint64_t> sample_seed;
  std::optional<std::string> capacity;
  std::optional<std::string> scheduler;
  std::optional<double> tol;
  std::optional<std::string> baselines;
  std::optional<std::string> trace;
  std::vector<std::string> reports;
};

template <class T>
void take(std::optional<T>& dst, const json& j, const char* key) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("bad config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  try {
    take(c.model, j, "model");
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      if (d.is_number())
        c.dims = std::to_string(d.get<std::size_t>());
      else if (d.is_object())
        c.dims = std::to_string(d.at("in").get<std::size_t>()) + "," +
                 std::to_string(d.value("heads", std::size_t{1})) + "," +
                 std::to_string(d.at("out").get<std::size_t>());
      else
        c.dims = d.get<std::string>();
    }
    take(c.graph, j, "graph");
    take(c.summary, j, "summary");
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      take(c.n, s, "n");
      take(c.avg_degree, s, "avg_degree");
      take(c.topology, s, "topology");
      take(c.seed, s, "seed");
    }
    take(c.params, j, "params");
    take(c.cus, j, "num_cus");
    take(c.cus, j, "cus");
    take(c.freq_mhz, j, "freq_mhz");
    take(c.seed, j, "seed");
    take(c.out, j, "out");
    take(c.sample, j, "sample");
    take(c.sample_seed, j, "sample_seed");
    if (j.contains("capacity"))
      c.capacity = j.at("capacity").is_string() ? j.at("capacity").get<std::string>()
                                                : std::to_string(j.at("capacity").get<std::uint64_t>());
    take(c.scheduler, j, "scheduler");
    take(c.tol, j, "tol");
    take(c.baselines, j, "baselines");
    take(c.trace, j, "trace");
    if (j.contains("reports")) c.reports = j.at("reports").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error("bad config " + path.string() + ": " + e.what());
  }
  return c;
}

template <class T>
void overlay(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

RunConfig merge(RunConfig base, const RunConfig& flags) {
  overlay(base.model, flags.model);
  overlay(base.dims, flags.dims);
  overlay(base.graph, flags.graph);
  overlay(base.summary, flags.summary);
  overlay(base.n, flags.n);
  overlay(base.avg_degree, flags.avg_degree);
  overlay(base.topology, flags.topology);
  overlay(base.params, flags.params);
  overlay(base.cus, flags.cus);
  overlay(base.freq_mhz, flags.freq_mhz);
  overlay(base.seed, flags.seed);
  overlay(base.out, flags.out);
  overlay(base.sample, flags.sample);
  overlay(base.sample_seed, flags.sample_seed);
  overlay(base.capacity, flags.capacity);
  overlay(base.scheduler, flags.scheduler);
  overlay(base.tol, flags.tol);
  overlay(base.baselines, flags.baselines);
  overlay(base.trace, flags.trace);
  if (!flags.reports.empty()) base.reports = flags.reports;
  return base;
}

// "d" (square) or "in,heads,out".
Dims parse_dims(ModelKind k, const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoul(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error("bad --dims '" + s + "'");
    }
  }
  Dims d;
  if (v.size() == 1)
    d = square_dims(k, v[0]);
  else if (v.size() == 3)
    d = {v[0], v[1], v[2]};
  else
    throw Error("--dims takes d or in,heads,out");
  validate_dims(k, d);
  return d;
}

ModelKind model_of(const RunConfig& c) {
  if (!c.model) throw Error("--model is required");
  return parse_model_kind(*c.model);
}

std::vector<ModelKind> models_of(const RunConfig& c) {
  if (c.model && *c.model == "all") return {kAllModels.begin(), kAllModels.end()};
  return {model_of(c)};
}

std::uint64_t seed_of(const RunConfig& c) { return c.seed.value_or(1); }

fs::path out_dir(const RunConfig& c) {
  fs::path p = c.out.value_or("out");
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::size_t graph_sources(const RunConfig& c) {
  return (c.graph ? 1 : 0) + (c.summary ? 1 : 0) + (c.n ? 1 : 0);
}

SyntheticSpec synthetic_of(const RunConfig& c) {
  SyntheticSpec s;
  s.n = c.n.value_or(1);
  s.avg_degree = c.avg_degree.value_or(0.0);
  s.topology = parse_topology(c.topology.value_or("regular-like"));
  s.seed = seed_of(c);
  validate(s);
  return s;
}

struct LoadedGraph {
  EdgeList edges;
  CsrGraph csr;
  std::string name;
};

// Graph from --graph or a synthetic spec; `fallback` is used when neither is
// given (nullopt makes a graph mandatory).
LoadedGraph load_graph(const RunConfig& c, std::optional<SyntheticSpec> fallback = {}) {
  if (graph_sources(c) > 1) throw Error("give exactly one of --graph, --summary, --n");
  if (c.summary) throw Error("this command needs a full graph, not a summary");
  LoadedGraph g;
  if (c.graph) {
    g.edges = read_edge_list_file(*c.graph);
    g.name = fs::path(*c.graph).stem().string();
  } else if (c.n || fallback) {
    const auto s = c.n ? synthetic_of(c) : *fallback;
    g.edges = generate(s);
    g.name = "synthetic-" + std::string(to_string(s.topology)) + "-n" + std::to_string(s.n);
  } else {
    throw Error("no graph: give --graph or --n");
  }
  g.csr = build_csr(g.edges);
  return g;
}

GraphSummary load_summary(const std::string& ref) {
  fs::path p(ref);
  if (!fs::exists(p)) p = data_dir() / "datasets" / (ref + ".json");
  return load_graph_summary(p);
}

Fixture fixture_of(const RunConfig& c, ModelKind k, const CsrGraph& g) {
  const auto seed = seed_of(c);
  if (c.params) {
    Fixture f{{}, load_params(*c.params), {}};
    if (kind_of(f.params) != k) throw Error("--params holds a different model");
    const Dims d = dims_of(f.params);
    f.H = make_features(g.num_nodes(), d.in, seed);
    if (k == ModelKind::gatedgcn) f.edge = make_edge_features(g.num_edges(), d.in, seed + 2);
    return f;
  }
  const Dims d = c.dims ? parse_dims(k, *c.dims) : default_dims(k);
  return make_fixture(k, d, g.num_nodes(), g.num_edges(), seed);
}

json graph_json(const LoadedGraph& g) {
  return {{"name", g.name}, {"n", g.csr.num_nodes()}, {"m", g.csr.num_edges()}};
}

json dims_json(const Dims& d) { return {{"in", d.in}, {"heads", d.heads}, {"out", d.out}}; }

std::uint64_t capacity_of(const std::string& s) {
  if (s == "inf" || s == "unbounded") return kUnbounded;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw Error("bad capacity '" + s + "'");
}

HardwareProfile profile_of(const RunConfig& c, ModelKind k) {
  HardwareProfile hw = default_profile(k);
  if (c.freq_mhz) hw.frequency_hz = *c.freq_mhz * 1e6;
  if (c.cus) hw.num_cus = *c.cus;
  if (!(hw.frequency_hz > 0)) throw RangeError("--freq-mhz must be positive");
  if (hw.num_cus == 0) throw RangeError("--cus must be at least 1");
  return hw;
}

// ---- commands ---------------------------------------------------------------

int cmd_gen(const RunConfig& c) {
  const auto s = synthetic_of(c);
  const auto el = generate(s);
  const auto dir = out_dir(c);
  write_text(dir / "graph.txt", format_edge_list(el));
  const auto summary = summarize(build_csr(el), "synthetic");
  json rep{{"command", "gen"},
           {"synthetic", {{"n", s.n}, {"avg_degree", s.avg_degree},
                          {"topology", std::string(to_string(s.topology))}, {"seed", s.seed}}},
           {"summary", summary}};
  write_json(dir / "report.json", rep);
  std::cout << "wrote " << (dir / "graph.txt").string() << ": n=" << summary.n
            << " m=" << summary.m << " max_degree=" << summary.max_degree << "\n";
  return kOk;
}

void save_layer(const fs::path& dir, const LayerOutput& out) {
  write_tensor(dir / "output.gnnh", out.output);
  if (out.attention.rows()) write_tensor(dir / "attention.gnnh", out.attention);
  if (out.edge_output.rows()) write_tensor(dir / "edge_output.gnnh", out.edge_output);
}

int cmd_run(const RunConfig& c) {
  const auto k = model_of(c);
  const auto g = load_graph(c);
  const auto f = fixture_of(c, k, g.csr);
  const auto out = reference_forward(g.csr, f.H, f.params, f.edge);
  const auto dir = out_dir(c);
  save_layer(dir, out);
  json rep{{"command", "run"},
           {"model", std::string(to_string(k))},
           {"dims", dims_json(dims_of(f.params))},
           {"graph", graph_json(g)},
           {"seed", seed_of(c)},
           {"output", {{"rows", out.output.rows()}, {"cols", out.output.cols()}}}};
  write_json(dir / "report.json", rep);
  std::cout << to_string(k) << ": reference output " << out.output.rows() << "x"
            << out.output.cols() << " written to " << dir.string() << "\n";
  return kOk;
}

int cmd_pipeline(const RunConfig& c) {
  const auto k = model_of(c);
  const auto g = load_graph(c);
  const auto f = fixture_of(c, k, g.csr);
  const Dims d = dims_of(f.params);
  auto spec = build_pipeline(k, d, c.cus.value_or(1));
  StreamOptions opts;
  if (c.capacity) opts.capacity = capacity_of(*c.capacity);
  const auto sched = c.scheduler.value_or("threaded");
  if (sched == "round-robin" || sched == "round_robin")
    opts.scheduler = Scheduler::round_robin;
  else if (sched != "threaded")
    throw Error("unknown scheduler '" + sched + "'");
  const double tol = c.tol.value_or(1e-4);

  const auto want = reference_forward(g.csr, f.H, f.params, f.edge);
  const auto got = execute_streaming(spec, g.csr, f.H, f.params, f.edge, opts);
  double err = max_relative_error(got.output, want.output);
  if (want.attention.rows())
    err = std::max(err, max_relative_error(got.attention, want.attention));
  if (want.edge_output.rows())
    err = std::max(err, max_relative_error(got.edge_output, want.edge_output));
  const bool pass = err <= tol;

  const auto dir = out_dir(c);
  save_layer(dir, got);
  json rep{{"command", "pipeline"},
           {"model", std::string(to_string(k))},
           {"dims", dims_json(d)},
           {"graph", graph_json(g)},
           {"num_cus", spec.num_cus},
           {"scheduler", sched},
           {"max_rel_err", err},
           {"tol", tol},
           {"pass", pass}};
  write_json(dir / "report.json", rep);
  char line[128];
  std::snprintf(line, sizeof line, "max rel err = %.3g (tol %.0e) %s", err, tol,
                pass ? "PASS" : "FAIL");
  std::cout << to_string(k) << ": " << line << "\n";
  return pass ? kOk : kCheckFailed;
}

void write_cycle_report(const fs::path& dir, const CycleReport& r, const std::string& cmd) {
  json rep = to_json(r);
  rep["command"] = cmd;
  write_json(dir / "report.json", rep);
  write_text(dir / "cycles.csv", std::string(kCycleCsvHeader) + "\n" + cycle_csv_rows(r));
}

int cmd_sim(const RunConfig& c) {
  const auto k = model_of(c);
  const auto g = load_graph(c);
  const Dims d = c.dims ? parse_dims(k, *c.dims) : default_dims(k);
  const auto hw = profile_of(c, k);
  auto spec = build_pipeline(k, d, hw.num_cus);
  if (c.capacity)
    for (auto& fifo : spec.fifos) fifo.capacity = capacity_of(*c.capacity);
  const auto rep = simulate_cycles(spec, g.csr, hw.frequency_hz, g.name);
  write_cycle_report(out_dir(c), rep, "sim");
  std::cout << to_string(k) << " on " << g.name << ": " << format_number(rep.total_cycles)
            << " cycles, " << format_number(rep.seconds) << " s, bottleneck " << rep.bottleneck
            << "\n";
  return kOk;
}

int cmd_model(const RunConfig& c) {
  const auto k = model_of(c);
  if (!c.summary) throw Error("model needs --summary (dataset name or summary file)");
  if (graph_sources(c) > 1) throw Error("give exactly one of --graph, --summary, --n");
  const auto s = load_summary(*c.summary);
  const Dims d = c.dims ? parse_dims(k, *c.dims) : default_dims(k);
  const auto hw = profile_of(c, k);
  const auto rep = analytic_cycles(k, degree_stats(s), d, hw, s.name);
  write_cycle_report(out_dir(c), rep, "model");
  std::cout << to_string(k) << " on " << s.name << ": " << format_number(rep.total_cycles)
            << " cycles, " << format_number(rep.seconds) << " s, bottleneck " << rep.bottleneck
            << "\n";
  return kOk;
}

int cmd_characterize(const RunConfig& c) {
  const auto g = load_graph(c, dense_graph_spec());
  const auto dir = out_dir(c);
  const auto count = std::min(c.sample.value_or(kDefaultSampleSize), g.csr.num_nodes());
  const auto sample = sample_nodes(g.csr, count, c.sample_seed.value_or(kDefaultSampleSeed));
  const auto models = models_of(c);
  if (c.trace && models.size() != 1) throw Error("--trace needs a single --model");

  json rep{{"command", "characterize"}, {"graph", graph_json(g)}, {"sample_size", count},
           {"sample_seed", c.sample_seed.value_or(kDefaultSampleSeed)}};
  rep["results"] = json::array();
  std::string csv = "model,graph,sample,branch,memory,compute,spatial,temporal\n";
  for (auto k : models) {
    const auto f = fixture_of(c, k, g.csr);
    if (c.trace) {
      const auto t = run_traced(g.csr, f.H, f.params, f.edge, sample, g.name);
      write_trace(fs::path(*c.trace), t);
    }
    const auto r = characterize(g.csr, f.H, f.params, f.edge, sample, g.name);
    rep["results"].push_back(to_json(r));
    const bool any = r.mix.total() > 0;
    csv += std::string(to_string(k)) + "," + g.name + "," + std::to_string(count) + "," +
           format_number(any ? r.mix.fraction(EventKind::branch) : 0) + "," +
           format_number(any ? r.mix.fraction(EventKind::memory) : 0) + "," +
           format_number(any ? r.mix.fraction(EventKind::compute) : 0) + "," +
           format_number(r.scores.spatial) + "," + format_number(r.scores.temporal) + "\n";
    std::cout << to_string(k) << ": events=" << r.mix.total() << " spatial="
              << format_number(r.scores.spatial) << " temporal="
              << format_number(r.scores.temporal) << "\n";
  }
  write_json(dir / "report.json", rep);
  write_text(dir / "characterization.csv", csv);
  return kOk;
}

// HLS time per (model, dataset) from model / sim reports.
std::vector<HlsResult> hls_from_reports(const std::vector<std::string>& paths) {
  std::vector<HlsResult> out;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open report " + p);
    json j;
    try {
      j = json::parse(in);
      out.push_back({std::string(table_name(parse_model_kind(j.at("model").get<std::string>()))),
                     j.at("dataset").get<std::string>(), j.at("seconds").get<double>(),
                     std::nullopt});
    } catch (const json::exception& e) {
      throw Error("bad report " + p + ": " + e.what());
    }
  }
  return out;
}

int cmd_compare(const RunConfig& c) {
  const auto baselines = c.baselines ? load_baselines(*c.baselines) : default_baselines();
  const auto table = c.reports.empty() ? speedup_table(baselines)
                                       : speedup_table(hls_from_reports(c.reports), baselines);
  const auto dir = out_dir(c);
  ComparisonTable speed, energy;
  for (const auto& r : table.rows)
    (r.metric.ends_with("speedup") ? speed : energy).rows.push_back(r);
  const std::string header = std::string(kComparisonCsvHeader) + "\n";
  write_text(dir / "speedup.csv", header + comparison_csv_rows(speed));
  write_text(dir / "energy.csv", header + comparison_csv_rows(energy));

  json rep = to_json(table);
  rep["command"] = "compare";
  rep["max"] = json::object();
  for (const char* metric :
       {"cpu_speedup", "gpu_speedup", "cpu_energy_reduction", "gpu_energy_reduction"}) {
    if (const auto best = table.max_of(metric)) {
      rep["max"][metric] = {{"model", best->model}, {"dataset", best->dataset},
                            {"value", *best->value}};
      std::cout << "max " << metric << " = " << format_ratio(*best->value) << " ("
                << best->model << "/" << best->dataset << ")\n";
    }
  }
  std::size_t oom = 0;
  for (const auto& r : table.rows) oom += r.oom;
  rep["oom_rows"] = oom;
  write_json(dir / "report.json", rep);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNN layer kernels, dataflow pipeline model and workload characterization"};
  app.require_subcommand(1);
  RunConfig flags;
  std::optional<std::string> config;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config; flags override its values");
    sub->add_option("--out", flags.out, "output directory (default: out)");
    sub->add_option("--seed", flags.seed, "seed for features, parameters and generated graphs");
  };
  auto graph_opts = [&](CLI::App* sub) {
    sub->add_option("--graph", flags.graph, "edge-list file");
    sub->add_option("--n", flags.n, "synthetic graph: node count");
    sub->add_option("--avg-degree", flags.avg_degree, "synthetic graph: average degree");
    sub->add_option("--topology", flags.topology, "synthetic graph: regular-like | powerlaw-like");
  };
  auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--model", flags.model, "gcn, graphsage, gin, gat, monet, gatedgcn");
    sub->add_option("--dims", flags.dims, "d (square) or in,heads,out");
  };
  auto hw_opts = [&](CLI::App* sub) {
    sub->add_option("--cus", flags.cus, "compute units");
    sub->add_option("--freq-mhz", flags.freq_mhz, "clock frequency in MHz");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic edge list");
  common(gen);
  gen->add_option("--n", flags.n, "node count");
  gen->add_option("--avg-degree", flags.avg_degree, "average in-degree");
  gen->add_option("--topology", flags.topology, "regular-like | powerlaw-like");

  auto* run = app.add_subcommand("run", "sequential reference layer");
  common(run), graph_opts(run), model_opts(run);
  run->add_option("--params", flags.params, "parameter manifest (default: seeded)");

  auto* pipe = app.add_subcommand("pipeline", "streaming pipeline checked against the reference");
  common(pipe), graph_opts(pipe), model_opts(pipe);
  pipe->add_option("--params", flags.params, "parameter manifest (default: seeded)");
  pipe->add_option("--cus", flags.cus, "compute units");
  pipe->add_option("--capacity", flags.capacity, "FIFO capacity for every channel, or inf");
  pipe->add_option("--scheduler", flags.scheduler, "threaded | round-robin");
  pipe->add_option("--tol", flags.tol, "relative tolerance (default 1e-4)");

  auto* sim = app.add_subcommand("sim", "cycle simulation on a full graph");
  common(sim), graph_opts(sim), model_opts(sim), hw_opts(sim);
  sim->add_option("--capacity", flags.capacity, "FIFO capacity for every channel, or inf");

  auto* model = app.add_subcommand("model", "analytic cycle model from a graph summary");
  common(model), model_opts(model), hw_opts(model);
  model->add_option("--summary", flags.summary, "dataset name (MT, MH, AX, PT) or summary file");

  auto* chr = app.add_subcommand("characterize", "instruction mix and locality of a node sample");
  common(chr), graph_opts(chr), model_opts(chr);
  chr->add_option("--params", flags.params, "parameter manifest (default: seeded)");
  chr->add_option("--sample", flags.sample, "sampled target nodes (default 500)");
  chr->add_option("--sample-seed", flags.sample_seed, "sampling seed (default 42)");
  chr->add_option("--trace", flags.trace, "also dump the binary trace here");

  auto* cmp = app.add_subcommand("compare", "speedup and energy tables against the baselines");
  common(cmp);
  cmp->add_option("--baselines", flags.baselines, "baselines CSV (default: shipped)");
  cmp->add_option("--report", flags.reports, "model/sim report.json to use as HLS time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    const RunConfig cfg = merge(config ? load_config(*config) : RunConfig{}, flags);
    if (gen->parsed()) return cmd_gen(cfg);
    if (run->parsed()) return cmd_run(cfg);
    if (pipe->parsed()) return cmd_pipeline(cfg);
    if (sim->parsed()) return cmd_sim(cfg);
    if (model->parsed()) return cmd_model(cfg);
    if (chr->parsed()) return cmd_characterize(cfg);
    if (cmp->parsed()) return cmd_compare(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  return kBadInput;
}
