#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/generate.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/params.hpp"
#include "gnnhls/probe.hpp"
#include "gnnhls/reference.hpp"

// Abstract instruction traces of the reference kernels over a node sample,
// with instruction mix and spatial / temporal locality scores.

namespace gnnhls {

inline constexpr std::size_t kDefaultSampleSize = 500;
inline constexpr std::uint64_t kDefaultSampleSeed = 42;

// Dense synthetic graph used for the directional mix / locality checks.
inline SyntheticSpec dense_graph_spec() { return {1000, 16.0, Topology::regular_like, 42}; }

enum class EventKind : std::uint8_t { branch = 0, memory = 1, compute = 2 };
enum class Access : std::uint8_t { none = 0, read = 1, write = 2 };

struct TraceEvent {
  EventKind kind = EventKind::branch;
  Access access = Access::none;
  std::uint64_t address = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  ModelKind model = ModelKind::gcn;
  std::string graph;
  std::vector<NodeId> sample;
  std::vector<TraceEvent> events;
};

inline constexpr std::uint64_t kRegionWords = std::uint64_t{1} << 24;

// Word address = base(array) + flat element index. Bases are consecutive
// multiples of 2^24, each past the end of the previous array.
class AddressMap {
 public:
  AddressMap() = default;

  static AddressMap for_problem(const CsrGraph& g, const ModelParams& params) {
    const Dims d = dims_of(params);
    const std::uint64_t n = g.num_nodes(), m = g.num_edges(), K = d.heads;
    const ModelKind kind = kind_of(params);
    std::array<std::uint64_t, kArrayCount> size{};
    auto set = [&](ArrayId a, std::uint64_t s) { size[static_cast<std::size_t>(a)] = s; };
    set(ArrayId::row_offsets, n + 1);
    set(ArrayId::col_indices, m);
    set(ArrayId::features, n * d.in);
    set(ArrayId::output, n * output_width(kind, d));
    for (auto a : {ArrayId::w_u, ArrayId::w_v, ArrayId::w_w, ArrayId::w_a, ArrayId::w_b,
                   ArrayId::w_c, ArrayId::w_d, ArrayId::w_e})
      set(a, K * d.out * d.in);
    set(ArrayId::att_src, K * d.out);
    set(ArrayId::att_dest, K * d.out);
    set(ArrayId::z, n * K * d.out);
    set(ArrayId::el, n * K);
    set(ArrayId::er, n * K);
    set(ArrayId::pseudo, 2 * m);
    set(ArrayId::pseudo_w, 4);
    set(ArrayId::pseudo_b, 2);
    set(ArrayId::mu, 2 * K);
    set(ArrayId::sigma_inv, 2 * K);
    set(ArrayId::edge_in, m * d.in);
    set(ArrayId::edge_out, m * d.out);
    AddressMap map;
    std::uint64_t next = 0;
    for (std::size_t a = 0; a < kArrayCount; ++a) {
      map.base_[a] = next;
      const std::uint64_t end = next + std::max<std::uint64_t>(size[a], 1);
      next = (end + kRegionWords - 1) / kRegionWords * kRegionWords;
    }
    return map;
  }

  std::uint64_t base(ArrayId a) const { return base_[static_cast<std::size_t>(a)]; }
  std::uint64_t address(ArrayId a, std::size_t index) const { return base(a) + index; }

  // Same layout moved by a constant offset.
  AddressMap shifted(std::uint64_t offset) const {
    AddressMap m = *this;
    for (auto& b : m.base_) b += offset;
    return m;
  }

 private:
  std::array<std::uint64_t, kArrayCount> base_{};
};

// ---- locality accumulators ------------------------------------------------

struct InstructionMix {
  std::uint64_t branch = 0, memory = 0, compute = 0;

  std::uint64_t total() const { return branch + memory + compute; }
  double fraction(EventKind k) const {
    if (!total()) throw Error("instruction mix of an empty trace");
    const auto c = k == EventKind::branch ? branch : k == EventKind::memory ? memory : compute;
    return static_cast<double>(c) / static_cast<double>(total());
  }
};

inline constexpr double kReuseCapLog2 = 16.0;  // D = 2^16

// max(0, (log2 D - log2(r+1)) / log2 D)
inline double temporal_weight(std::uint64_t reuse_distance) {
  const double v =
      (kReuseCapLog2 - std::log2(static_cast<double>(reuse_distance) + 1.0)) / kReuseCapLog2;
  return v > 0.0 ? v : 0.0;
}

// Mean of 1/stride over consecutive memory events; stride 0 contributes 0.
class SpatialAccumulator {
 public:
  void add(std::uint64_t a) {
    if (count_++) {
      const std::uint64_t s = a > prev_ ? a - prev_ : prev_ - a;
      if (s) sum_ += 1.0 / static_cast<double>(s);
    }
    prev_ = a;
  }
  std::uint64_t count() const { return count_; }
  double score() const {
    if (count_ < 2) throw Error("spatial score needs at least 2 memory events");
    return sum_ / static_cast<double>(count_ - 1);
  }

 private:
  std::uint64_t count_ = 0, prev_ = 0;
  double sum_ = 0.0;
};

// Reuse distance through a Fenwick tree over access times: a 1 marks the
// latest access of each address, so the distinct addresses touched since
// time p are the marks in (p, now).
class TemporalAccumulator {
 public:
  void add(std::uint64_t a) {
    const std::uint64_t now = tree_.size() + 1;  // 1-based time
    append(1);
    auto [it, fresh] = last_.try_emplace(a, now);
    if (!fresh) {
      const std::uint64_t p = it->second;
      const std::uint64_t r = prefix(now - 1) - prefix(p);
      sum_ += temporal_weight(r);
      update(p, -1);
      it->second = now;
    }
  }
  std::uint64_t count() const { return tree_.size(); }
  double score() const {
    if (tree_.empty()) throw Error("temporal score needs at least 1 memory event");
    return sum_ / static_cast<double>(tree_.size());
  }

 private:
  std::int64_t prefix(std::uint64_t i) const {
    std::int64_t s = 0;
    for (; i; i &= i - 1) s += tree_[i - 1];
    return s;
  }
  void update(std::uint64_t i, std::int64_t v) {
    for (; i <= tree_.size(); i += i & (~i + 1)) tree_[i - 1] += v;
  }
  // tree[i] covers (i - lowbit(i), i]; the new point's range sum is its value
  // plus the existing prefix difference.
  void append(std::int64_t v) {
    const std::uint64_t i = tree_.size() + 1;
    const std::uint64_t low = i & (~i + 1);
    tree_.push_back(v + prefix(i - 1) - prefix(i - low));
  }

  std::vector<std::int64_t> tree_;
  std::unordered_map<std::uint64_t, std::uint64_t> last_;
  double sum_ = 0.0;
};

struct LocalityScores {
  double spatial = 0.0;
  double temporal = 0.0;
};

// ---- probes ----------------------------------------------------------------

class RecordingProbe {
 public:
  static constexpr bool enabled = true;
  explicit RecordingProbe(const AddressMap& map, std::vector<TraceEvent>& out)
      : map_(map), out_(out) {}
  void branch() { out_.push_back({EventKind::branch, Access::none, 0}); }
  void read(ArrayId a, std::size_t i) {
    out_.push_back({EventKind::memory, Access::read, map_.address(a, i)});
  }
  void write(ArrayId a, std::size_t i) {
    out_.push_back({EventKind::memory, Access::write, map_.address(a, i)});
  }
  void compute(std::size_t n = 1) {
    for (std::size_t k = 0; k < n; ++k) out_.push_back({EventKind::compute, Access::none, 0});
  }

 private:
  const AddressMap& map_;
  std::vector<TraceEvent>& out_;
};

// Scores computed on the fly; nothing is stored per event.
class StatsProbe {
 public:
  static constexpr bool enabled = true;
  explicit StatsProbe(const AddressMap& map) : map_(map) {}
  void branch() { ++mix.branch; }
  void read(ArrayId a, std::size_t i) { memory(map_.address(a, i)); }
  void write(ArrayId a, std::size_t i) { memory(map_.address(a, i)); }
  void compute(std::size_t n = 1) { mix.compute += n; }

  InstructionMix mix;
  SpatialAccumulator spatial;
  TemporalAccumulator temporal;

 private:
  void memory(std::uint64_t a) {
    ++mix.memory;
    spatial.add(a);
    temporal.add(a);
  }
  const AddressMap& map_;
};

// ---- traced execution -------------------------------------------------------

// Runs the reference kernels for the listed target nodes only, in list order.
// GAT first computes its kernel-1 intermediates for every node untraced, since
// sampled targets read them for their neighbours; the traced part is
// kernel 1 then kernel 2 on the sample.
template <class P>
void trace_layer(const CsrGraph& g, const FeatureMatrix& H, const ModelParams& params,
                 const EdgeFeatures& edge, std::span<const NodeId> nodes, P& probe) {
  validate_params(params);
  const Dims d = dims_of(params);
  ref::check_features(g, H, d.in);
  for (NodeId i : nodes)
    if (i >= g.num_nodes())
      throw RangeError("sampled node " + std::to_string(i) + " is out of range (n=" +
                       std::to_string(g.num_nodes()) + ")");
  const std::size_t n = g.num_nodes();
  FeatureMatrix out(n, output_width(kind_of(params), d));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GcnParams>) {
          for (NodeId i : nodes) ref::gcn_node(g, H, p, i, out, probe);
        } else if constexpr (std::is_same_v<T, SageParams>) {
          for (NodeId i : nodes) ref::sage_node(g, H, p, i, out, probe);
        } else if constexpr (std::is_same_v<T, GinParams>) {
          for (NodeId i : nodes) ref::gin_node(g, H, p, i, out, probe);
        } else if constexpr (std::is_same_v<T, GatParams>) {
          auto mid = gat_project(H, p);
          for (NodeId i : nodes) ref::gat_project_node(H, p, i, mid, probe);
          for (NodeId i : nodes) ref::gat_attend_node(g, p, mid, i, out, nullptr, probe);
        } else if constexpr (std::is_same_v<T, MonetParams>) {
          const auto pseudo = pseudo_coordinates(g);
          for (NodeId i : nodes) ref::monet_node(g, H, p, pseudo, i, out, probe);
        } else {
          if (edge.rows() != g.num_edges() || edge.cols() != d.in)
            throw DimensionError("edge features must be m x d_in");
          EdgeFeatures eout(g.num_edges(), d.out);
          for (NodeId i : nodes) ref::gated_node(g, H, edge, p, i, out, eout, probe);
        }
      },
      params);
}

inline Trace run_traced(const CsrGraph& g, const FeatureMatrix& H, const ModelParams& params,
                        const EdgeFeatures& edge, std::span<const NodeId> nodes,
                        std::string graph_name = "", const AddressMap* map = nullptr) {
  const AddressMap own = map ? *map : AddressMap::for_problem(g, params);
  Trace t{kind_of(params), std::move(graph_name), {nodes.begin(), nodes.end()}, {}};
  RecordingProbe probe(own, t.events);
  trace_layer(g, H, params, edge, nodes, probe);
  return t;
}

inline InstructionMix instruction_mix(const Trace& t) {
  if (t.events.empty()) throw Error("instruction mix of an empty trace");
  InstructionMix m;
  for (const auto& e : t.events) {
    switch (e.kind) {
      case EventKind::branch: ++m.branch; break;
      case EventKind::memory: ++m.memory; break;
      case EventKind::compute: ++m.compute; break;
    }
  }
  return m;
}

inline double spatial_score(const Trace& t) {
  SpatialAccumulator acc;
  for (const auto& e : t.events)
    if (e.kind == EventKind::memory) acc.add(e.address);
  return acc.score();
}

inline double temporal_score(const Trace& t) {
  TemporalAccumulator acc;
  for (const auto& e : t.events)
    if (e.kind == EventKind::memory) acc.add(e.address);
  return acc.score();
}

struct Characterization {
  ModelKind model = ModelKind::gcn;
  std::string graph;
  std::size_t sample_size = 0;
  InstructionMix mix;
  LocalityScores scores;
};

// Same numbers as run_traced + the score functions, without keeping the
// trace in memory.
inline Characterization characterize(const CsrGraph& g, const FeatureMatrix& H,
                                     const ModelParams& params, const EdgeFeatures& edge,
                                     std::span<const NodeId> nodes, std::string graph_name = "") {
  const auto map = AddressMap::for_problem(g, params);
  StatsProbe probe(map);
  trace_layer(g, H, params, edge, nodes, probe);
  Characterization c{kind_of(params), std::move(graph_name), nodes.size(), probe.mix, {}};
  if (probe.mix.memory >= 2) c.scores = {probe.spatial.score(), probe.temporal.score()};
  return c;
}

// ---- output -----------------------------------------------------------------

// "GNNT", then per event: kind (1 byte), access (1 byte), address (8 bytes LE).
inline void write_trace(std::ostream& os, const Trace& t) {
  os.write("GNNT", 4);
  for (const auto& e : t.events) {
    char rec[10];
    rec[0] = static_cast<char>(e.kind);
    rec[1] = static_cast<char>(e.access);
    for (int b = 0; b < 8; ++b) rec[2 + b] = static_cast<char>((e.address >> (8 * b)) & 0xFF);
    os.write(rec, sizeof rec);
  }
  if (!os) throw Error("failed to write trace");
}

inline void write_trace(const std::filesystem::path& path, const Trace& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_trace(os, t);
}

inline std::vector<TraceEvent> read_trace_events(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "GNNT")
    throw ParseError(0, "not a GNNT trace");
  std::vector<TraceEvent> events;
  char rec[10];
  while (is.read(rec, sizeof rec)) {
    TraceEvent e;
    e.kind = static_cast<EventKind>(rec[0]);
    e.access = static_cast<Access>(rec[1]);
    for (int b = 0; b < 8; ++b)
      e.address |= static_cast<std::uint64_t>(static_cast<unsigned char>(rec[2 + b])) << (8 * b);
    events.push_back(e);
  }
  if (is.gcount() != 0) throw ParseError(0, "truncated trace record");
  return events;
}

inline nlohmann::json to_json(const Characterization& c) {
  return {{"model", std::string(to_string(c.model))},
          {"graph", c.graph},
          {"sample_size", c.sample_size},
          {"events", {{"branch", c.mix.branch}, {"memory", c.mix.memory},
                      {"compute", c.mix.compute}}},
          {"mix",
           c.mix.total()
               ? nlohmann::json{{"branch", c.mix.fraction(EventKind::branch)},
                                {"memory", c.mix.fraction(EventKind::memory)},
                                {"compute", c.mix.fraction(EventKind::compute)}}
               : nlohmann::json(nullptr)},
          {"spatial", c.scores.spatial},
          {"temporal", c.scores.temporal}};
}

}  // namespace gnnhls
