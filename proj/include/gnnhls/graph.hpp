#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/rng.hpp"

namespace gnnhls {

using NodeId = std::uint32_t;
using EdgeIndex = std::uint64_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Ingestion form of a graph: edges in file order, duplicates and self-loops
// kept as given.
struct EdgeList {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
};

struct NodeRange {
  NodeId start = 0;
  NodeId end = 0;  // exclusive

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const NodeRange&, const NodeRange&) = default;
};

enum class RowOrder { sorted, any };

// Compressed sparse rows over in-neighbours: row i lists the sources j of
// every edge j -> i, ascending.
class CsrGraph {
 public:
  CsrGraph() : offsets_{0} {}

  static CsrGraph from_arrays(std::vector<EdgeIndex> offsets,
                              std::vector<NodeId> cols,
                              RowOrder order = RowOrder::sorted) {
    if (offsets.empty()) throw RangeError("row_offsets must have n+1 entries");
    if (offsets.front() != 0) throw RangeError("row_offsets[0] must be 0");
    if (offsets.back() != cols.size())
      throw RangeError("row_offsets[n] must equal the number of edges");
    const std::size_t n = offsets.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (offsets[i] > offsets[i + 1])
        throw RangeError("row_offsets must be nondecreasing");
      for (EdgeIndex e = offsets[i]; e < offsets[i + 1]; ++e) {
        if (cols[e] >= n) throw RangeError("column index out of range");
        if (order == RowOrder::sorted && e > offsets[i] && cols[e - 1] > cols[e])
          throw RangeError("column indices must be sorted within each row");
      }
    }
    CsrGraph g;
    g.offsets_ = std::move(offsets);
    g.cols_ = std::move(cols);
    return g;
  }

  std::size_t num_nodes() const noexcept { return offsets_.size() - 1; }
  std::size_t num_edges() const noexcept { return cols_.size(); }

  std::span<const EdgeIndex> row_offsets() const noexcept { return offsets_; }
  std::span<const NodeId> col_indices() const noexcept { return cols_; }

  std::span<const NodeId> neighbors(std::size_t i) const noexcept {
    return std::span<const NodeId>(cols_).subspan(
        offsets_[i], offsets_[i + 1] - offsets_[i]);
  }

  std::size_t degree(std::size_t i) const noexcept {
    return offsets_[i + 1] - offsets_[i];
  }

  // Target node of every edge, in CSR order.
  std::vector<NodeId> edge_targets() const {
    std::vector<NodeId> targets(num_edges());
    for (std::size_t i = 0; i < num_nodes(); ++i)
      std::fill(targets.begin() + offsets_[i], targets.begin() + offsets_[i + 1],
                static_cast<NodeId>(i));
    return targets;
  }

 private:
  std::vector<EdgeIndex> offsets_;
  std::vector<NodeId> cols_;
};

struct DegreeStats {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t max_degree = 0;
  double avg_degree = 0.0;
  std::vector<std::uint32_t> degrees;  // empty when built from a summary

  bool has_per_node() const noexcept { return degrees.size() == n && n > 0; }
};

// Table-style metadata for a dataset that is not shipped as an edge list.
struct GraphSummary {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t max_degree = 0;
  double avg_degree = 0.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits a line into exactly two unsigned decimal fields.
inline std::optional<std::pair<std::uint64_t, std::uint64_t>> two_fields(
    std::string_view line) {
  std::uint64_t vals[2];
  std::size_t pos = 0;
  for (int k = 0; k < 2; ++k) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos == line.size()) return std::nullopt;
    const char* first = line.data() + pos;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, vals[k]);
    if (ec != std::errc{} || ptr == first) return std::nullopt;
    pos = static_cast<std::size_t>(ptr - line.data());
    if (pos < line.size() && line[pos] != ' ' && line[pos] != '\t')
      return std::nullopt;
  }
  if (!trim(line.substr(pos)).empty()) return std::nullopt;
  return std::pair{vals[0], vals[1]};
}

}  // namespace detail

// Text format: '#' comment lines, a header "n m", then m lines "src dst".
inline EdgeList parse_edge_list(std::string_view text) {
  EdgeList el;
  bool have_header = false;
  std::uint64_t expected = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                   : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::two_fields(line);
    if (!fields) throw ParseError(line_no, "expected two unsigned integers");
    if (!have_header) {
      el.num_nodes = fields->first;
      expected = fields->second;
      if (el.num_nodes > std::uint64_t{0xFFFFFFFFu})
        throw ParseError(line_no, "node count exceeds 32-bit ids");
      el.edges.reserve(expected);
      have_header = true;
      continue;
    }
    if (el.edges.size() == expected)
      throw ParseError(line_no, "more edges than declared in the header");
    const auto [src, dst] = *fields;
    if (src >= el.num_nodes || dst >= el.num_nodes)
      throw RangeError("line " + std::to_string(line_no) + ": node id " +
                       std::to_string(std::max(src, dst)) + " >= n=" +
                       std::to_string(el.num_nodes));
    el.edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst)});
  }
  if (!have_header) throw ParseError(line_no, "missing \"n m\" header");
  if (el.edges.size() != expected)
    throw ParseError(line_no, "header declares " + std::to_string(expected) +
                                  " edges, found " + std::to_string(el.edges.size()));
  return el;
}

inline EdgeList read_edge_list_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open edge list " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_edge_list(ss.str());
}

inline std::string format_edge_list(const EdgeList& el) {
  std::string out;
  out.reserve(16 + el.edges.size() * 12);
  out += std::to_string(el.num_nodes) + ' ' + std::to_string(el.edges.size()) + '\n';
  for (const auto& e : el.edges)
    out += std::to_string(e.src) + ' ' + std::to_string(e.dst) + '\n';
  return out;
}

inline CsrGraph build_csr(const EdgeList& el) {
  const std::size_t n = el.num_nodes;
  std::vector<EdgeIndex> offsets(n + 1, 0);
  for (const auto& e : el.edges) {
    if (e.src >= n || e.dst >= n) throw RangeError("edge endpoint out of range");
    ++offsets[e.dst + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<NodeId> cols(el.edges.size());
  std::vector<EdgeIndex> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& e : el.edges) cols[cursor[e.dst]++] = e.src;
  for (std::size_t i = 0; i < n; ++i)
    std::sort(cols.begin() + offsets[i], cols.begin() + offsets[i + 1]);
  return CsrGraph::from_arrays(std::move(offsets), std::move(cols));
}

inline DegreeStats degree_stats(const CsrGraph& g) {
  DegreeStats s;
  s.n = g.num_nodes();
  s.m = g.num_edges();
  s.degrees.resize(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    s.degrees[i] = static_cast<std::uint32_t>(g.degree(i));
    s.max_degree = std::max<std::size_t>(s.max_degree, s.degrees[i]);
  }
  s.avg_degree = s.n ? static_cast<double>(s.m) / static_cast<double>(s.n) : 0.0;
  return s;
}

inline DegreeStats degree_stats(const GraphSummary& summary) {
  DegreeStats s;
  s.n = summary.n;
  s.m = summary.m;
  s.max_degree = summary.max_degree;
  s.avg_degree = summary.avg_degree;
  return s;
}

// Partial Fisher-Yates over 0..n-1 driven by SplitMix64(seed).
inline std::vector<NodeId> sample_nodes(std::size_t n, std::size_t count,
                                        std::uint64_t seed) {
  if (count > n)
    throw RangeError("cannot sample " + std::to_string(count) + " of " +
                     std::to_string(n) + " nodes");
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  return ids;
}

inline std::vector<NodeId> sample_nodes(const CsrGraph& g, std::size_t count,
                                        std::uint64_t seed) {
  return sample_nodes(g.num_nodes(), count, seed);
}

using PseudoCoord = std::array<float, 2>;

// Per-edge (deg_i^-0.5, deg_j^+0.5) for edge j -> i, CSR order. Degrees are
// in-degrees clamped to at least 1.
inline std::vector<PseudoCoord> pseudo_coordinates(const CsrGraph& g) {
  std::vector<PseudoCoord> out;
  out.reserve(g.num_edges());
  auto deg = [&](std::size_t v) {
    return static_cast<double>(std::max<std::size_t>(g.degree(v), 1));
  };
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const float target = static_cast<float>(1.0 / std::sqrt(deg(i)));
    for (NodeId j : g.neighbors(i))
      out.push_back({target, static_cast<float>(std::sqrt(deg(j)))});
  }
  return out;
}

// Contiguous ranges whose sizes differ by at most one; earlier ranges take
// the remainder.
inline std::vector<NodeRange> partition_contiguous(std::size_t n,
                                                   std::size_t num_cus) {
  if (num_cus == 0) throw RangeError("num_cus must be at least 1");
  if (num_cus > n)
    throw RangeError("num_cus (" + std::to_string(num_cus) +
                     ") exceeds node count (" + std::to_string(n) + ")");
  std::vector<NodeRange> ranges;
  ranges.reserve(num_cus);
  const std::size_t base = n / num_cus;
  const std::size_t extra = n % num_cus;
  std::size_t start = 0;
  for (std::size_t c = 0; c < num_cus; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    ranges.push_back({static_cast<NodeId>(start), static_cast<NodeId>(start + len)});
    start += len;
  }
  return ranges;
}

inline void to_json(nlohmann::json& j, const GraphSummary& s) {
  j = nlohmann::json{{"name", s.name},
                     {"n", s.n},
                     {"m", s.m},
                     {"max_degree", s.max_degree},
                     {"avg_degree", s.avg_degree}};
}

inline void from_json(const nlohmann::json& j, GraphSummary& s) {
  j.at("name").get_to(s.name);
  j.at("n").get_to(s.n);
  j.at("m").get_to(s.m);
  j.at("max_degree").get_to(s.max_degree);
  j.at("avg_degree").get_to(s.avg_degree);
}

inline GraphSummary load_graph_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph summary " + path.string());
  try {
    return nlohmann::json::parse(in).get<GraphSummary>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad graph summary " + path.string() + ": " + e.what());
  }
}

inline GraphSummary summarize(const CsrGraph& g, std::string name) {
  const auto s = degree_stats(g);
  return {std::move(name), s.n, s.m, s.max_degree, s.avg_degree};
}

}  // namespace gnnhls
