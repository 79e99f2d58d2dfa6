#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/pipeline.hpp"

namespace gnnhls {

struct StageCycles {
  std::string id;
  std::string kernel;
  Cycles cycles = 0;   // summed II over every item, all CUs
  Cycles latency = 0;  // resolved pipeline depth
};

struct KernelCycles {
  std::string name;
  double cycles = 0;
  std::string bottleneck;
};

struct CycleReport {
  std::string model;
  std::string dataset;
  std::string mode;  // "simulated" or "analytic"
  std::size_t num_cus = 1;
  std::vector<StageCycles> stages;
  std::vector<KernelCycles> kernels;
  std::string bottleneck;
  double total_cycles = 0;
  double bound_cycles = 0;  // bottleneck law: per kernel max stage work, summed
  Cycles latency_sum = 0;
  double frequency_hz = 0;
  double seconds = 0;

  const StageCycles& stage(std::string_view id) const {
    for (const auto& s : stages)
      if (s.id == id) return s;
    throw Error("report has no stage '" + std::string(id) + "'");
  }
};

// Resolved latency of a stage: explicit value, else the II at the average
// degree rounded up, at least 1.
inline Cycles resolve_latency(const StageSpec& s, const Dims& dims, double avg_degree) {
  if (s.latency) {
    if (*s.latency == 0) throw RangeError("stage '" + s.id + "' has latency 0");
    return *s.latency;
  }
  const double ii = static_cast<double>(ii_slope(s.ii, dims)) * avg_degree +
                    static_cast<double>(ii_base(s.ii, dims));
  return std::max<Cycles>(1, static_cast<Cycles>(std::ceil(ii - 1e-9)));
}

namespace sim {

inline constexpr Cycles kUnknown = std::numeric_limits<Cycles>::max();

struct Fifo {
  std::size_t from = 0, to = 0;
  bool gather = false;
  std::uint64_t capacity = kUnbounded;
  std::vector<Cycles> push, pop;
};

struct Stage {
  const StageSpec* spec = nullptr;
  std::size_t jobs = 0;
  Cycles latency = 1;
  std::vector<std::size_t> in_same, in_gather, out;
  std::vector<EdgeIndex> cursor;  // per gather input
  std::size_t next = 0;
  bool active = false;
  Cycles activation = 0, gather_ready = 0;
  Cycles ready = 0;  // earliest activation of the next job
  Cycles work = 0, last_end = 0;
};

struct KernelResult {
  Cycles total = 0;
  std::vector<Cycles> work;  // per stage of the kernel
};

// Simulates one kernel over one CU's nodes. deg holds the in-degrees of the
// CU's nodes; the edges are their rows, in order.
inline KernelResult run_kernel(const PipelineSpec& spec, const KernelSpec& kernel,
                               std::span<const std::uint32_t> deg,
                               const std::vector<Cycles>& latency) {
  const std::size_t n = deg.size();
  std::vector<EdgeIndex> off(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) off[i + 1] = off[i] + deg[i];
  const EdgeIndex m = off[n];
  std::vector<std::uint32_t> edge_target_deg(m);
  for (std::size_t i = 0; i < n; ++i)
    std::fill(edge_target_deg.begin() + off[i], edge_target_deg.begin() + off[i + 1], deg[i]);

  std::vector<Stage> st(kernel.stages.size());
  auto local = [&](const std::string& id) {
    return static_cast<std::size_t>(
        std::find(kernel.stages.begin(), kernel.stages.end(), id) - kernel.stages.begin());
  };
  for (std::size_t s = 0; s < st.size(); ++s) {
    const std::size_t g = spec.stage_index(kernel.stages[s]);
    st[s].spec = &spec.stages[g];
    st[s].jobs = st[s].spec->granularity == Granularity::per_node ? n : m;
    st[s].latency = latency[g];
  }
  std::vector<Fifo> fifos;
  for (const auto& f : spec.fifos) {
    const std::size_t a = local(f.from), b = local(f.to);
    if (a == st.size() || b == st.size()) continue;
    Fifo q;
    q.from = a;
    q.to = b;
    q.gather = is_gather(spec, f);
    q.capacity = f.capacity;
    q.push.assign(st[a].jobs, kUnknown);
    q.pop.assign(st[a].jobs, kUnknown);
    const std::size_t id = fifos.size();
    fifos.push_back(std::move(q));
    st[a].out.push_back(id);
    if (fifos[id].gather) {
      st[b].in_gather.push_back(id);
      st[b].cursor.push_back(0);
    } else {
      st[b].in_same.push_back(id);
    }
  }

  auto ii_of = [&](const Stage& s, std::size_t j) {
    const std::uint32_t d =
        s.spec->granularity == Granularity::per_node ? deg[j] : edge_target_deg[j];
    return ii_eval(s.spec->ii, d, spec.dims);
  };

  auto advance = [&](Stage& s) {
    bool progress = false;
    while (s.next < s.jobs) {
      const std::size_t j = s.next;
      if (!s.active) {
        Cycles a = s.ready;
        for (std::size_t f : s.in_same) {
          if (fifos[f].push[j] == kUnknown) return progress;
          a = std::max(a, fifos[f].push[j]);
        }
        for (std::size_t f : s.out) {
          const auto cap = fifos[f].capacity;
          if (cap != kUnbounded && j >= cap) {
            const Cycles freed = fifos[f].pop[j - cap];
            if (freed == kUnknown) return progress;
            a = std::max(a, freed);
          }
        }
        s.active = true;
        s.activation = a;
        s.gather_ready = a;
        for (std::size_t f : s.in_same) fifos[f].pop[j] = a;
        progress = true;
      }
      bool complete = true;
      for (std::size_t k = 0; k < s.in_gather.size(); ++k) {
        auto& q = fifos[s.in_gather[k]];
        auto& c = s.cursor[k];
        while (c < off[j + 1] && q.push[c] != kUnknown) {
          q.pop[c] = std::max(q.push[c], s.activation);
          s.gather_ready = std::max(s.gather_ready, q.push[c]);
          ++c;
          progress = true;
        }
        if (c < off[j + 1]) complete = false;
      }
      if (!complete) return progress;
      const Cycles start = s.gather_ready;
      const Cycles ii = ii_of(s, j);
      for (std::size_t f : s.out) fifos[f].push[j] = start + s.latency;
      s.work += ii;
      s.ready = start + ii;
      s.last_end = start + std::max(ii, s.latency);
      s.active = false;
      ++s.next;
      progress = true;
    }
    return progress;
  };

  for (;;) {
    bool progress = false, done = true;
    for (auto& s : st) {
      progress |= advance(s);
      done &= s.next == s.jobs;
    }
    if (done) break;
    if (!progress) {
      std::string stuck;
      for (const auto& s : st)
        if (s.next < s.jobs) stuck += (stuck.empty() ? "" : ", ") + s.spec->id;
      throw DataflowError("kernel '" + kernel.name +
                          "' cannot make progress (FIFO capacities too small for its "
                          "topology); stalled stages: " + stuck);
    }
  }
  KernelResult r;
  for (const auto& s : st) {
    r.total = std::max(r.total, s.last_end);
    r.work.push_back(s.work);
  }
  return r;
}

}  // namespace sim

// Discrete-event simulation over per-node degrees. Each CU owns a contiguous
// node range and runs every kernel; kernels run back to back.
inline CycleReport simulate_cycles(const PipelineSpec& spec, const DegreeStats& stats,
                                   double frequency_hz, std::string dataset = "") {
  validate(spec);
  if (!(frequency_hz > 0)) throw RangeError("frequency must be positive");
  if (stats.n > 0 && stats.degrees.size() != stats.n)
    throw Error("simulation needs per-node degrees; use the analytic model for summaries");
  CycleReport rep;
  rep.model = std::string(to_string(spec.model));
  rep.dataset = std::move(dataset);
  rep.mode = "simulated";
  rep.num_cus = spec.num_cus;
  rep.frequency_hz = frequency_hz;

  std::vector<Cycles> latency(spec.stages.size());
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    latency[s] = resolve_latency(spec.stages[s], spec.dims, stats.avg_degree);
    rep.latency_sum += latency[s];
  }
  std::vector<Cycles> work(spec.stages.size(), 0);

  const std::size_t cus = std::max<std::size_t>(1, std::min(spec.num_cus, stats.n));
  const auto ranges = stats.n ? partition_contiguous(stats.n, cus)
                              : std::vector<NodeRange>{NodeRange{0, 0}};
  Cycles best_stage_work = 0;
  for (const auto& k : spec.kernels) {
    Cycles kernel_time = 0, kernel_bound = 0;
    for (const auto& r : ranges) {
      std::span<const std::uint32_t> deg(stats.degrees.data() + r.start, r.size());
      const auto res = sim::run_kernel(spec, k, deg, latency);
      kernel_time = std::max(kernel_time, res.total);
      kernel_bound = std::max(kernel_bound, *std::max_element(res.work.begin(), res.work.end()));
      for (std::size_t s = 0; s < k.stages.size(); ++s)
        work[spec.stage_index(k.stages[s])] += res.work[s];
    }
    KernelCycles kc{k.name, static_cast<double>(kernel_time), ""};
    Cycles top = 0;
    for (const auto& id : k.stages) {
      const Cycles w = work[spec.stage_index(id)];
      if (kc.bottleneck.empty() || w > top) {
        top = w;
        kc.bottleneck = id;
      }
    }
    if (rep.bottleneck.empty() || top > best_stage_work) {
      best_stage_work = top;
      rep.bottleneck = kc.bottleneck;
    }
    rep.total_cycles += kc.cycles;
    rep.bound_cycles += static_cast<double>(kernel_bound);
    rep.kernels.push_back(std::move(kc));
  }
  for (const auto& k : spec.kernels)
    for (const auto& id : k.stages) {
      const std::size_t s = spec.stage_index(id);
      rep.stages.push_back({id, k.name, work[s], latency[s]});
    }
  rep.seconds = rep.total_cycles / frequency_hz;
  return rep;
}

inline CycleReport simulate_cycles(const PipelineSpec& spec, const CsrGraph& g,
                                   double frequency_hz, std::string dataset = "") {
  return simulate_cycles(spec, degree_stats(g), frequency_hz, std::move(dataset));
}

// ---- output --------------------------------------------------------------

inline nlohmann::json to_json(const CycleReport& r) {
  nlohmann::json j{{"model", r.model},
                   {"dataset", r.dataset},
                   {"mode", r.mode},
                   {"num_cus", r.num_cus},
                   {"bottleneck", r.bottleneck},
                   {"total_cycles", r.total_cycles},
                   {"bound_cycles", r.bound_cycles},
                   {"latency_sum", r.latency_sum},
                   {"frequency_hz", r.frequency_hz},
                   {"seconds", r.seconds}};
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : r.kernels)
    j["kernels"].push_back({{"name", k.name}, {"cycles", k.cycles}, {"bottleneck", k.bottleneck}});
  j["stages"] = nlohmann::json::array();
  for (const auto& s : r.stages)
    j["stages"].push_back(
        {{"id", s.id}, {"kernel", s.kernel}, {"cycles", s.cycles}, {"latency", s.latency}});
  return j;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline constexpr std::string_view kCycleCsvHeader = "model,dataset,stage,cycles,bottleneck,seconds";

// One row per stage plus a "total" row. Stage seconds assume ideal CU
// scaling (work / num_cus / frequency).
inline std::string cycle_csv_rows(const CycleReport& r) {
  std::string out;
  const double per_cu = static_cast<double>(std::max<std::size_t>(1, r.num_cus));
  for (const auto& s : r.stages)
    out += r.model + "," + r.dataset + "," + s.id + "," + std::to_string(s.cycles) + "," +
           (s.id == r.bottleneck ? "1" : "0") + "," +
           format_number(static_cast<double>(s.cycles) / per_cu / r.frequency_hz) + "\n";
  out += r.model + "," + r.dataset + ",total," + format_number(r.total_cycles) + ",0," +
         format_number(r.seconds) + "\n";
  return out;
}

}  // namespace gnnhls
