#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/model.hpp"

namespace gnnhls {

using Cycles = std::uint64_t;

// cycles = per_degree*deg + per_degree_head*k*deg + per_head*k + per_dim*d_in + constant
struct IiFormula {
  Cycles per_degree = 0;
  Cycles per_degree_head = 0;
  Cycles per_head = 0;
  Cycles per_dim = 0;
  Cycles constant = 1;
  bool published = false;
  std::string source;  // where an unpublished value was borrowed from

  bool depends_on_degree() const noexcept { return per_degree || per_degree_head; }
  friend bool operator==(const IiFormula&, const IiFormula&) = default;
};

inline Cycles ii_eval(const IiFormula& f, std::uint64_t degree, const Dims& dims) noexcept {
  return f.per_degree * degree + f.per_degree_head * dims.heads * degree +
         f.per_head * dims.heads + f.per_dim * dims.in + f.constant;
}

// Degree-independent part of the formula, and the coefficient on degree.
inline Cycles ii_base(const IiFormula& f, const Dims& dims) noexcept {
  return ii_eval(f, 0, dims);
}
inline Cycles ii_slope(const IiFormula& f, const Dims& dims) noexcept {
  return f.per_degree + f.per_degree_head * dims.heads;
}

namespace ii {

inline IiFormula published(Cycles deg, Cycles deg_head, Cycles head, Cycles dim, Cycles c) {
  return {deg, deg_head, head, dim, c, true, ""};
}
inline IiFormula reused(IiFormula f, std::string from) {
  f.published = false;
  f.source = std::move(from);
  return f;
}

// Published module figures.
inline IiFormula gcn_aggregation() { return published(4, 0, 0, 0, 2); }
inline IiFormula gcn_vmm() { return published(0, 0, 0, 1, 36); }
inline IiFormula gat_k1_mhewm() { return published(0, 0, 1, 0, 112); }
inline IiFormula gat_aggregation() { return published(0, 1, 2, 0, 38); }
inline IiFormula gat_softmax() { return published(0, 1, 1, 0, 17); }
inline IiFormula gat_mhewm() { return published(0, 1, 1, 0, 14); }
inline IiFormula monet_vmm_pseudo() { return published(0, 0, 0, 0, 1); }
inline IiFormula monet_gaussian() { return published(0, 0, 0, 0, 1); }
inline IiFormula monet_mhewm() { return published(0, 0, 0, 0, 4); }
inline IiFormula monet_mhvmm() { return published(0, 0, 1, 1, 28); }
inline IiFormula monet_mh_aggregate() { return published(0, 0, 7, 0, 10); }
inline IiFormula gated_soft_attention() { return published(10, 0, 0, 0, 72); }
inline IiFormula gated_sum() { return published(0, 0, 0, 0, 31); }

// Stages without a published figure.
inline IiFormula memory() { return reused(published(0, 0, 0, 0, 1), "memory access at one item per cycle"); }
inline IiFormula vmm() { return reused(gcn_vmm(), "gcn.vmm"); }
inline IiFormula aggregation() { return reused(gcn_aggregation(), "gcn.aggregate"); }
inline IiFormula sum() { return reused(gated_sum(), "gatedgcn.sum"); }
inline IiFormula elementwise() { return reused(published(0, 0, 0, 0, 1), "monet.vmm_pseudo"); }

}  // namespace ii

enum class StageKind {
  memory_read,
  memory_write,
  aggregation,
  vmm,
  mhewm,
  softmax,
  gaussian,
  soft_attention,
  sum,
  elementwise
};

inline std::string_view to_string(StageKind k) noexcept {
  switch (k) {
    case StageKind::memory_read: return "memory-read";
    case StageKind::memory_write: return "memory-write";
    case StageKind::aggregation: return "aggregation";
    case StageKind::vmm: return "vmm";
    case StageKind::mhewm: return "mhewm";
    case StageKind::softmax: return "softmax";
    case StageKind::gaussian: return "gaussian";
    case StageKind::soft_attention: return "soft-attention";
    case StageKind::sum: return "sum";
    case StageKind::elementwise: return "elementwise";
  }
  return "?";
}

enum class Granularity { per_node, per_edge };

inline std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::per_node ? "per-node" : "per-edge";
}

inline constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint64_t kDefaultFifoCapacity = 16;

struct StageSpec {
  std::string id;
  StageKind kind = StageKind::elementwise;
  Granularity granularity = Granularity::per_node;
  IiFormula ii;
  std::optional<Cycles> latency;  // unset: ceil(II at average degree), at least 1
};

// An edge-to-node FIFO is a gather: node job i drains deg_i items.
// Node-to-edge FIFOs are not allowed; per-edge results headed for a node
// stage travel as one batched item per node.
struct FifoSpec {
  std::string from;
  std::string to;
  std::uint64_t capacity = kDefaultFifoCapacity;
  std::size_t width = 1;  // elements per item
};

struct KernelSpec {
  std::string name;
  std::vector<std::string> stages;  // topological order
};

struct PipelineSpec {
  ModelKind model = ModelKind::gcn;
  Dims dims;
  std::size_t num_cus = 1;
  std::vector<StageSpec> stages;
  std::vector<FifoSpec> fifos;
  std::vector<KernelSpec> kernels;

  std::size_t stage_index(std::string_view id) const {
    for (std::size_t s = 0; s < stages.size(); ++s)
      if (stages[s].id == id) return s;
    throw Error("no stage named '" + std::string(id) + "'");
  }
  const StageSpec& stage(std::string_view id) const { return stages[stage_index(id)]; }

  void set_capacity(std::uint64_t capacity) {
    for (auto& f : fifos) f.capacity = capacity;
  }
};

inline bool is_gather(const PipelineSpec& p, const FifoSpec& f) {
  return p.stage(f.from).granularity == Granularity::per_edge &&
         p.stage(f.to).granularity == Granularity::per_node;
}

// Checks endpoints, capacities, kernel membership and acyclicity.
inline void validate(const PipelineSpec& p) {
  if (p.num_cus == 0) throw RangeError("num_cus must be at least 1");
  std::unordered_map<std::string, std::size_t> kernel_of;
  for (std::size_t k = 0; k < p.kernels.size(); ++k)
    for (const auto& id : p.kernels[k].stages) {
      p.stage_index(id);
      if (!kernel_of.emplace(id, k).second)
        throw Error("stage '" + id + "' appears in more than one kernel");
    }
  for (const auto& s : p.stages)
    if (!kernel_of.count(s.id)) throw Error("stage '" + s.id + "' belongs to no kernel");
  for (const auto& f : p.fifos) {
    const auto& from = p.stage(f.from);
    const auto& to = p.stage(f.to);
    if (f.capacity == 0) throw RangeError("FIFO " + f.from + "->" + f.to + " has capacity 0");
    if (kernel_of[f.from] != kernel_of[f.to])
      throw Error("FIFO " + f.from + "->" + f.to + " crosses kernels");
    if (from.granularity == Granularity::per_node && to.granularity == Granularity::per_edge)
      throw Error("FIFO " + f.from + "->" + f.to + " runs from a node stage to an edge stage");
  }
  // Kahn's algorithm over the whole stage graph.
  std::vector<std::size_t> indeg(p.stages.size(), 0);
  for (const auto& f : p.fifos) ++indeg[p.stage_index(f.to)];
  std::vector<std::size_t> queue;
  for (std::size_t s = 0; s < p.stages.size(); ++s)
    if (!indeg[s]) queue.push_back(s);
  std::size_t seen = 0;
  while (!queue.empty()) {
    const std::size_t s = queue.back();
    queue.pop_back();
    ++seen;
    for (const auto& f : p.fifos)
      if (f.from == p.stages[s].id && --indeg[p.stage_index(f.to)] == 0)
        queue.push_back(p.stage_index(f.to));
  }
  if (seen != p.stages.size()) throw Error("stage graph contains a cycle");
}

namespace detail {

struct Builder {
  PipelineSpec spec;

  Builder& stage(std::string id, StageKind kind, Granularity g, IiFormula f) {
    spec.stages.push_back({std::move(id), kind, g, std::move(f), std::nullopt});
    return *this;
  }
  Builder& fifo(std::string from, std::string to, std::size_t width) {
    spec.fifos.push_back({std::move(from), std::move(to), kDefaultFifoCapacity, width});
    return *this;
  }
  Builder& kernel(std::string name, std::vector<std::string> ids) {
    spec.kernels.push_back({std::move(name), std::move(ids)});
    return *this;
  }
};

}  // namespace detail

inline PipelineSpec build_pipeline(ModelKind model, const Dims& dims, std::size_t num_cus) {
  validate_dims(model, dims);
  if (num_cus == 0) throw RangeError("num_cus must be at least 1");
  using G = Granularity;
  using K = StageKind;
  detail::Builder b;
  b.spec.model = model;
  b.spec.dims = dims;
  b.spec.num_cus = num_cus;
  const std::size_t d = dims.in, k = dims.heads, o = dims.out;
  switch (model) {
    case ModelKind::gcn:
      b.stage("read", K::memory_read, G::per_edge, ii::memory())
          .stage("aggregate", K::aggregation, G::per_node, ii::gcn_aggregation())
          .stage("vmm", K::vmm, G::per_node, ii::gcn_vmm())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .fifo("read", "aggregate", d)
          .fifo("aggregate", "vmm", d)
          .fifo("vmm", "write", o)
          .kernel("gcn", {"read", "aggregate", "vmm", "write"});
      break;
    case ModelKind::graphsage:
      b.stage("read_target", K::memory_read, G::per_node, ii::memory())
          .stage("vmm_target", K::vmm, G::per_node, ii::vmm())
          .stage("read_neighbors", K::memory_read, G::per_edge, ii::memory())
          .stage("aggregate", K::aggregation, G::per_node, ii::aggregation())
          .stage("vmm_neighbor", K::vmm, G::per_node, ii::vmm())
          .stage("sum", K::sum, G::per_node, ii::sum())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .fifo("read_target", "vmm_target", d)
          .fifo("read_neighbors", "aggregate", d)
          .fifo("aggregate", "vmm_neighbor", d)
          .fifo("vmm_target", "sum", o)
          .fifo("vmm_neighbor", "sum", o)
          .fifo("sum", "write", o)
          .kernel("graphsage", {"read_target", "vmm_target", "read_neighbors", "aggregate",
                                "vmm_neighbor", "sum", "write"});
      break;
    case ModelKind::gin:
      b.stage("read_target", K::memory_read, G::per_node, ii::memory())
          .stage("read_neighbors", K::memory_read, G::per_edge, ii::memory())
          .stage("aggregate", K::aggregation, G::per_node, ii::aggregation())
          .stage("vmm_v", K::vmm, G::per_node, ii::vmm())
          .stage("vmm_u", K::vmm, G::per_node, ii::vmm())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .fifo("read_target", "aggregate", d)
          .fifo("read_neighbors", "aggregate", d)
          .fifo("aggregate", "vmm_v", d)
          .fifo("vmm_v", "vmm_u", o)
          .fifo("vmm_u", "write", o)
          .kernel("gin", {"read_target", "read_neighbors", "aggregate", "vmm_v", "vmm_u",
                          "write"});
      break;
    case ModelKind::gat:
      b.stage("k1_read", K::memory_read, G::per_node, ii::memory())
          .stage("k1_vmm", K::vmm, G::per_node, ii::vmm())
          .stage("k1_mhewm", K::mhewm, G::per_node, ii::gat_k1_mhewm())
          .stage("k1_write", K::memory_write, G::per_node, ii::memory())
          .fifo("k1_read", "k1_vmm", d)
          .fifo("k1_vmm", "k1_mhewm", k * o)
          .fifo("k1_mhewm", "k1_write", k * o + 2 * k)
          .kernel("gat_kernel1", {"k1_read", "k1_vmm", "k1_mhewm", "k1_write"})
          // Kernel 2: e_ij is produced on two independent edge paths, one
          // feeding the softmax statistics and one feeding the weighting.
          .stage("read_scores_a", K::memory_read, G::per_edge, ii::memory())
          .stage("eij_softmax", K::elementwise, G::per_edge, ii::elementwise())
          .stage("softmax", K::softmax, G::per_node, ii::gat_softmax())
          .stage("read_scores_b", K::memory_read, G::per_edge, ii::memory())
          .stage("eij_weight", K::elementwise, G::per_edge, ii::elementwise())
          .stage("read_features", K::memory_read, G::per_edge, ii::memory())
          .stage("mhewm", K::mhewm, G::per_node, ii::gat_mhewm())
          .stage("aggregation", K::aggregation, G::per_node, ii::gat_aggregation())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .fifo("read_scores_a", "eij_softmax", 2 * k)
          .fifo("eij_softmax", "softmax", k)
          .fifo("read_scores_b", "eij_weight", 2 * k)
          .fifo("eij_weight", "mhewm", k)
          .fifo("read_features", "mhewm", k * o)
          .fifo("softmax", "mhewm", 2 * k)
          .fifo("mhewm", "aggregation", k * o)
          .fifo("aggregation", "write", k * o)
          .kernel("gat_kernel2", {"read_scores_a", "eij_softmax", "softmax", "read_scores_b",
                                  "eij_weight", "read_features", "mhewm", "aggregation",
                                  "write"});
      break;
    case ModelKind::monet:
      b.stage("read_pseudo", K::memory_read, G::per_edge, ii::memory())
          .stage("vmm_pseudo", K::vmm, G::per_edge, ii::monet_vmm_pseudo())
          .stage("gaussian", K::gaussian, G::per_edge, ii::monet_gaussian())
          .stage("read_neighbors", K::memory_read, G::per_edge, ii::memory())
          .stage("mhewm", K::mhewm, G::per_edge, ii::monet_mhewm())
          .stage("mhvmm", K::vmm, G::per_node, ii::monet_mhvmm())
          .stage("mh_aggregate", K::aggregation, G::per_node, ii::monet_mh_aggregate())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .fifo("read_pseudo", "vmm_pseudo", 2)
          .fifo("vmm_pseudo", "gaussian", 2)
          .fifo("gaussian", "mhewm", k)
          .fifo("read_neighbors", "mhewm", d)
          .fifo("mhewm", "mhvmm", k * d)
          .fifo("mhvmm", "mh_aggregate", k * o)
          .fifo("mh_aggregate", "write", o)
          .kernel("monet", {"read_pseudo", "vmm_pseudo", "gaussian", "read_neighbors", "mhewm",
                            "mhvmm", "mh_aggregate", "write"});
      break;
    case ModelKind::gatedgcn:
      b.stage("read_target", K::memory_read, G::per_node, ii::memory())
          .stage("vmm_a", K::vmm, G::per_node, ii::vmm())
          .stage("vmm_e", K::vmm, G::per_node, ii::vmm())
          .stage("read_neighbors", K::memory_read, G::per_edge, ii::memory())
          .stage("vmm_b", K::vmm, G::per_edge, ii::vmm())
          .stage("vmm_d", K::vmm, G::per_edge, ii::vmm())
          .stage("read_edge_features", K::memory_read, G::per_edge, ii::memory())
          .stage("vmm_c", K::vmm, G::per_edge, ii::vmm())
          .stage("soft_attention", K::soft_attention, G::per_node, ii::gated_soft_attention())
          .stage("sum", K::sum, G::per_node, ii::gated_sum())
          .stage("write", K::memory_write, G::per_node, ii::memory())
          .stage("write_edges", K::memory_write, G::per_node, ii::memory())
          .fifo("read_target", "vmm_a", d)
          .fifo("read_target", "vmm_e", d)
          .fifo("read_neighbors", "vmm_b", d)
          .fifo("read_neighbors", "vmm_d", d)
          .fifo("read_edge_features", "vmm_c", d)
          .fifo("vmm_e", "soft_attention", o)
          .fifo("vmm_b", "soft_attention", o)
          .fifo("vmm_d", "soft_attention", o)
          .fifo("vmm_c", "soft_attention", o)
          .fifo("vmm_a", "sum", o)
          .fifo("soft_attention", "sum", o)
          .fifo("soft_attention", "write_edges", o)
          .fifo("sum", "write", o)
          .kernel("gatedgcn", {"read_target", "vmm_a", "vmm_e", "read_neighbors", "vmm_b",
                               "vmm_d", "read_edge_features", "vmm_c", "soft_attention", "sum",
                               "write", "write_edges"});
      break;
  }
  validate(b.spec);
  return b.spec;
}

inline PipelineSpec build_pipeline(ModelKind model) {
  return build_pipeline(model, default_dims(model), default_num_cus(model));
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json capacity_json(std::uint64_t c) {
  return c == kUnbounded ? nlohmann::json("unbounded") : nlohmann::json(c);
}

inline std::uint64_t capacity_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "unbounded") return kUnbounded;
    throw Error("capacity must be a positive integer or \"unbounded\"");
  }
  return j.get<std::uint64_t>();
}

inline nlohmann::json to_json(const IiFormula& f) {
  nlohmann::json j{{"per_degree", f.per_degree}, {"per_degree_head", f.per_degree_head},
                   {"per_head", f.per_head},     {"per_dim", f.per_dim},
                   {"constant", f.constant},     {"published", f.published}};
  if (!f.source.empty()) j["source"] = f.source;
  return j;
}

inline nlohmann::json to_json(const PipelineSpec& p) {
  nlohmann::json j;
  j["model"] = std::string(to_string(p.model));
  j["dims"] = {{"in", p.dims.in}, {"heads", p.dims.heads}, {"out", p.dims.out}};
  j["num_cus"] = p.num_cus;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : p.stages) {
    nlohmann::json js{{"id", s.id},
                      {"kind", std::string(to_string(s.kind))},
                      {"granularity", std::string(to_string(s.granularity))},
                      {"ii", to_json(s.ii)}};
    js["latency"] = s.latency ? nlohmann::json(*s.latency) : nlohmann::json("auto");
    j["stages"].push_back(js);
  }
  j["fifos"] = nlohmann::json::array();
  for (const auto& f : p.fifos)
    j["fifos"].push_back({{"from", f.from},
                          {"to", f.to},
                          {"capacity", capacity_json(f.capacity)},
                          {"width", f.width}});
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : p.kernels) j["kernels"].push_back({{"name", k.name}, {"stages", k.stages}});
  return j;
}

}  // namespace gnnhls
