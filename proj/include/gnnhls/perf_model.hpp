#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/model.hpp"
#include "gnnhls/pipeline.hpp"
#include "gnnhls/simulate.hpp"

#ifndef GNNHLS_DATA_DIR
#define GNNHLS_DATA_DIR "data"
#endif

namespace gnnhls {

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("GNNHLS_DATA"); env && *env) return env;
  return GNNHLS_DATA_DIR;
}

struct HardwareProfile {
  ModelKind model = ModelKind::gcn;
  double frequency_hz = 0;
  std::size_t num_cus = 1;
};

inline std::map<ModelKind, HardwareProfile> load_hardware_profiles(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open hardware profile file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  std::map<ModelKind, HardwareProfile> out;
  for (const auto& [name, v] : j.items()) {
    HardwareProfile p{parse_model_kind(name), v.at("freq_mhz").get<double>() * 1e6,
                      v.at("num_cus").get<std::size_t>()};
    if (!(p.frequency_hz > 0)) throw RangeError(name + ": frequency must be positive");
    if (p.num_cus == 0) throw RangeError(name + ": num_cus must be at least 1");
    out[p.model] = p;
  }
  return out;
}

inline HardwareProfile default_profile(ModelKind model) {
  static const auto profiles = load_hardware_profiles(data_dir() / "hardware.json");
  const auto it = profiles.find(model);
  if (it == profiles.end())
    throw Error("no hardware profile for " + std::string(to_string(model)));
  return it->second;
}

// Closed-form cycles from (n, m). Every II is affine in degree, so the sum
// over nodes is slope*m + base*n.
inline CycleReport analytic_cycles(const PipelineSpec& spec, const DegreeStats& stats,
                                   const HardwareProfile& hw, std::string dataset = "") {
  validate(spec);
  if (!(hw.frequency_hz > 0)) throw RangeError("frequency must be positive");
  if (hw.num_cus == 0) throw RangeError("num_cus must be at least 1");
  CycleReport rep;
  rep.model = std::string(to_string(spec.model));
  rep.dataset = std::move(dataset);
  rep.mode = "analytic";
  rep.num_cus = hw.num_cus;
  rep.frequency_hz = hw.frequency_hz;
  double best = -1;
  for (const auto& k : spec.kernels) {
    KernelCycles kc{k.name, 0, ""};
    Cycles top = 0;
    for (const auto& id : k.stages) {
      const auto& s = spec.stage(id);
      Cycles work = 0;
      if (s.granularity == Granularity::per_node) {
        work = ii_slope(s.ii, spec.dims) * stats.m + ii_base(s.ii, spec.dims) * stats.n;
      } else if (!s.ii.depends_on_degree()) {
        work = ii_base(s.ii, spec.dims) * stats.m;
      } else {
        // Per-edge II keyed on the target's degree: needs sum of deg^2.
        if (!stats.has_per_node())
          throw Error("stage '" + id + "' needs per-node degrees for the analytic model");
        for (auto d : stats.degrees) work += static_cast<Cycles>(d) * ii_eval(s.ii, d, spec.dims);
      }
      const double lat = static_cast<double>(resolve_latency(s, spec.dims, stats.avg_degree));
      rep.latency_sum += static_cast<Cycles>(lat);
      rep.stages.push_back({id, k.name, work, static_cast<Cycles>(lat)});
      if (kc.bottleneck.empty() || work > top) {
        top = work;
        kc.bottleneck = id;
      }
    }
    kc.cycles = static_cast<double>(top) / static_cast<double>(hw.num_cus);
    if (static_cast<double>(top) > best) {
      best = static_cast<double>(top);
      rep.bottleneck = kc.bottleneck;
    }
    rep.total_cycles += kc.cycles;
    rep.kernels.push_back(std::move(kc));
  }
  rep.bound_cycles = rep.total_cycles;
  rep.seconds = rep.total_cycles / hw.frequency_hz;
  return rep;
}

inline CycleReport analytic_cycles(ModelKind model, const DegreeStats& stats, const Dims& dims,
                                   const HardwareProfile& hw, std::string dataset = "") {
  return analytic_cycles(build_pipeline(model, dims, hw.num_cus), stats, hw, std::move(dataset));
}

// ---- baselines -------------------------------------------------------------

struct BaselineRow {
  std::string model;     // table name: GCN, GS, GIN, GAT, MN, GGCN
  std::string dataset;   // MT, MH, AX, PT
  std::string platform;  // cpu, gpu, hls
  std::optional<double> time_s;
  std::optional<double> energy_j;
  bool oom = false;
};

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_optional(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(line, "bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<BaselineRow> parse_baselines(std::string_view text) {
  std::vector<BaselineRow> rows;
  std::size_t lineno = 0;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split_csv(line);
    if (header) {
      if (f != std::vector<std::string>{"model", "dataset", "platform", "time_s", "energy_j", "oom"})
        throw ParseError(lineno, "expected header model,dataset,platform,time_s,energy_j,oom");
      header = false;
      continue;
    }
    if (f.size() != 6)
      throw ParseError(lineno, "expected 6 fields");
    BaselineRow r{f[0], f[1], f[2], detail::parse_optional(f[3], lineno),
                  detail::parse_optional(f[4], lineno), f[5] == "1"};
    if (r.platform != "cpu" && r.platform != "gpu" && r.platform != "hls")
      throw ParseError(lineno, "unknown platform '" + r.platform + "'");
    if (!r.oom && !(r.time_s && *r.time_s > 0))
      throw ParseError(lineno, "time must be positive unless OoM");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<BaselineRow> load_baselines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open baselines file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_baselines(ss.str());
}

inline std::vector<BaselineRow> default_baselines() {
  return load_baselines(data_dir() / "baselines.csv");
}

// HLS-side measurement or prediction for one (model, dataset).
struct HlsResult {
  std::string model;
  std::string dataset;
  double time_s = 0;
  std::optional<double> energy_j;
};

struct ComparisonRow {
  std::string model;
  std::string dataset;
  std::string metric;  // cpu_speedup, gpu_speedup, cpu_energy_reduction, gpu_energy_reduction
  std::optional<double> value;
  bool oom = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;

  // Largest finite value of a metric, with its row.
  std::optional<ComparisonRow> max_of(std::string_view metric) const {
    std::optional<ComparisonRow> best;
    for (const auto& r : rows)
      if (r.metric == metric && r.value && (!best || *r.value > *best->value)) best = r;
    return best;
  }
};

// Ratios baseline/HLS for time and energy. Missing baselines are reported as
// warnings; OoM baselines are kept as flagged rows without a value.
inline ComparisonTable speedup_table(const std::vector<HlsResult>& hls,
                                     const std::vector<BaselineRow>& baselines) {
  ComparisonTable t;
  auto find = [&](const std::string& model, const std::string& ds, std::string_view platform) {
    const BaselineRow* hit = nullptr;
    for (const auto& b : baselines)
      if (b.model == model && b.dataset == ds && b.platform == platform) hit = &b;
    return hit;
  };
  for (const auto& h : hls) {
    if (!(h.time_s > 0)) {
      t.warnings.push_back(h.model + "/" + h.dataset + ": HLS time must be positive; skipped");
      continue;
    }
    for (std::string_view platform : {"cpu", "gpu"}) {
      const auto* b = find(h.model, h.dataset, platform);
      const std::string p(platform);
      if (!b) {
        t.warnings.push_back(h.model + "/" + h.dataset + ": no " + p + " baseline");
        continue;
      }
      ComparisonRow speed{h.model, h.dataset, p + "_speedup", std::nullopt, b->oom};
      ComparisonRow energy{h.model, h.dataset, p + "_energy_reduction", std::nullopt, b->oom};
      if (!b->oom) {
        speed.value = *b->time_s / h.time_s;
        if (b->energy_j && h.energy_j && *h.energy_j > 0)
          energy.value = *b->energy_j / *h.energy_j;
        else if (b->energy_j)
          t.warnings.push_back(h.model + "/" + h.dataset + ": no HLS energy; " + p +
                               " energy ratio omitted");
      }
      t.rows.push_back(std::move(speed));
      if (energy.value || energy.oom) t.rows.push_back(std::move(energy));
    }
  }
  return t;
}

// The shipped HLS rows against the shipped CPU/GPU rows.
inline ComparisonTable speedup_table(const std::vector<BaselineRow>& baselines) {
  std::vector<HlsResult> hls;
  for (const auto& b : baselines)
    if (b.platform == "hls" && b.time_s) hls.push_back({b.model, b.dataset, *b.time_s, b.energy_j});
  return speedup_table(hls, baselines);
}

inline constexpr std::string_view kComparisonCsvHeader = "model,dataset,metric,value";

// Values are printed with up to 3 significant decimals after rounding; OoM
// rows carry "OoM" in place of a value.
inline std::string format_ratio(double v) {
  std::ostringstream os;
  os << std::setprecision(v >= 100 ? 4 : 3) << v;
  return os.str();
}

inline std::string comparison_csv_rows(const ComparisonTable& t) {
  std::string out;
  for (const auto& r : t.rows)
    out += r.model + "," + r.dataset + "," + r.metric + "," +
           (r.oom ? std::string("OoM") : format_ratio(*r.value)) + "\n";
  return out;
}

inline nlohmann::json to_json(const ComparisonTable& t) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row{{"model", r.model}, {"dataset", r.dataset}, {"metric", r.metric},
                       {"oom", r.oom}};
    row["value"] = r.value ? nlohmann::json(*r.value) : nlohmann::json(nullptr);
    j["rows"].push_back(row);
  }
  j["warnings"] = t.warnings;
  return j;
}

}  // namespace gnnhls
