#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gnnhls/error.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/rng.hpp"

namespace gnnhls {

enum class Topology { regular_like, powerlaw_like };

inline Topology parse_topology(std::string_view s) {
  if (s == "regular" || s == "regular-like") return Topology::regular_like;
  if (s == "powerlaw" || s == "powerlaw-like") return Topology::powerlaw_like;
  throw Error("unknown topology '" + std::string(s) + "'");
}

inline std::string_view to_string(Topology t) noexcept {
  return t == Topology::regular_like ? "regular-like" : "powerlaw-like";
}

struct SyntheticSpec {
  std::size_t n = 1;
  double avg_degree = 0.0;
  Topology topology = Topology::regular_like;
  std::uint64_t seed = 1;
};

inline void validate(const SyntheticSpec& s) {
  if (s.n < 1) throw RangeError("synthetic graph needs n >= 1");
  if (!(s.avg_degree >= 0.0) || !std::isfinite(s.avg_degree))
    throw RangeError("avg_degree must be a finite value >= 0");
  if (s.n > 0xFFFFFFFFull) throw RangeError("n exceeds 32-bit node ids");
}

// Every node receives ceil(avg) in-edges from sources drawn uniformly with
// replacement.
inline EdgeList generate_regular(std::size_t n, double avg, std::uint64_t seed) {
  const auto per_node = static_cast<std::size_t>(std::ceil(avg));
  SplitMix64 rng(seed);
  EdgeList el{n, {}};
  el.edges.reserve(n * per_node);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < per_node; ++k)
      el.edges.push_back({static_cast<NodeId>(rng.below(n)), static_cast<NodeId>(i)});
  return el;
}

// Preferential attachment. Node t joins with c_t links (c_t <= t) to
// endpoints picked proportionally to current degree; the cumulative link
// count tracks round(avg * n / 2). Each link is emitted in both directions.
inline EdgeList generate_powerlaw(std::size_t n, double avg, std::uint64_t seed) {
  SplitMix64 rng(seed);
  EdgeList el{n, {}};
  if (n < 2) return el;
  const auto links = static_cast<std::size_t>(std::llround(avg * static_cast<double>(n) / 2.0));
  std::vector<NodeId> endpoints;
  endpoints.reserve(2 * links);
  el.edges.reserve(2 * links);
  std::size_t placed = 0;
  for (std::size_t t = 1; t < n; ++t) {
    const auto due = static_cast<std::size_t>(std::llround(
        static_cast<double>(links) * static_cast<double>(t) / static_cast<double>(n - 1)));
    const std::size_t c = std::min(due > placed ? due - placed : 0, t);
    for (std::size_t k = 0; k < c; ++k) {
      const NodeId s = endpoints.empty()
                           ? static_cast<NodeId>(rng.below(t))
                           : endpoints[rng.below(endpoints.size())];
      el.edges.push_back({static_cast<NodeId>(t), s});
      el.edges.push_back({s, static_cast<NodeId>(t)});
    }
    // Endpoints join the pool after the node's own draws.
    for (std::size_t k = el.edges.size() - 2 * c; k < el.edges.size(); k += 2) {
      endpoints.push_back(el.edges[k].src);
      endpoints.push_back(el.edges[k].dst);
    }
    placed += c;
  }
  return el;
}

inline EdgeList generate(const SyntheticSpec& s) {
  validate(s);
  return s.topology == Topology::regular_like ? generate_regular(s.n, s.avg_degree, s.seed)
                                              : generate_powerlaw(s.n, s.avg_degree, s.seed);
}

}  // namespace gnnhls
