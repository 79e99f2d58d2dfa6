#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "gnnhls/activation.hpp"
#include "gnnhls/error.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/params.hpp"
#include "gnnhls/probe.hpp"
#include "gnnhls/tensor.hpp"

// Sequential reference layers. Every kernel is written once, templated on a
// probe; with NullProbe it is the plain reference, with a recording probe it
// is the trace source of the characterizer.

namespace gnnhls {

namespace ref {

// Locals accumulate in double; values are rounded to float only when they
// are stored into a global array.
using Acc = double;

// Copies one row of a global array into a local buffer.
template <class Tag, class P>
void load_row(const BasicMatrix<Tag>& M, ArrayId id, std::size_t r, std::span<Acc> dst,
              P& probe) {
  const auto src = M.row(r);
  for (std::size_t c = 0; c < src.size(); ++c) {
    probe.branch();
    probe.read(id, r * M.cols() + c);
    dst[c] = src[c];
  }
}

// Same summation order as gnnhls::vmm; base offsets stacked per-head matrices.
template <class P>
void vmm(std::span<const Acc> x, const DenseMatrix& M, ArrayId id, std::size_t base,
         std::span<Acc> out, P& probe) {
  if (x.size() != M.cols() || out.size() != M.rows())
    throw DimensionError("vmm: operand sizes disagree");
  for (std::size_t r = 0; r < M.rows(); ++r) {
    probe.branch();
    const auto mr = M.row(r);
    Acc acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      probe.branch();
      probe.read(id, base + r * M.cols() + c);
      probe.compute(2);
      acc += static_cast<Acc>(mr[c]) * x[c];
    }
    out[r] = acc;
  }
}

template <class P>
std::pair<EdgeIndex, EdgeIndex> row_bounds(const CsrGraph& g, std::size_t i, P& probe) {
  probe.read(ArrayId::row_offsets, i);
  probe.read(ArrayId::row_offsets, i + 1);
  const auto off = g.row_offsets();
  return {off[i], off[i + 1]};
}

// acc += sum of h_j over the row, ascending neighbor position.
template <class P>
void aggregate(const CsrGraph& g, const FeatureMatrix& H, EdgeIndex b, EdgeIndex e,
               std::span<Acc> acc, P& probe) {
  const auto cols = g.col_indices();
  for (EdgeIndex k = b; k < e; ++k) {
    probe.branch();
    probe.read(ArrayId::col_indices, k);
    const NodeId j = cols[k];
    const auto hj = H.row(j);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      probe.branch();
      probe.read(ArrayId::features, j * H.cols() + c);
      probe.compute();
      acc[c] += hj[c];
    }
  }
}

template <class Tag, class P>
void store_relu(std::span<const Acc> v, BasicMatrix<Tag>& out, std::size_t i, P& probe) {
  auto row = out.row(i);
  for (std::size_t c = 0; c < v.size(); ++c) {
    probe.branch();
    probe.compute();
    probe.write(ArrayId::output, i * out.cols() + c);
    row[c] = static_cast<float>(relu(v[c]));
  }
}

inline void check_features(const CsrGraph& g, const FeatureMatrix& H, std::size_t d_in) {
  if (H.rows() != g.num_nodes())
    throw DimensionError("feature rows " + std::to_string(H.rows()) + " != n=" +
                         std::to_string(g.num_nodes()));
  if (H.cols() != d_in)
    throw DimensionError("feature width " + std::to_string(H.cols()) +
                         " != model input width " + std::to_string(d_in));
}

// ---- per-target kernels -------------------------------------------------

template <class P>
void gcn_node(const CsrGraph& g, const FeatureMatrix& H, const GcnParams& p, std::size_t i,
              FeatureMatrix& out, P& probe) {
  std::vector<Acc> acc(H.cols(), 0.0), y(p.U.rows());
  const auto [b, e] = row_bounds(g, i, probe);
  aggregate(g, H, b, e, acc, probe);
  vmm(acc, p.U, ArrayId::w_u, 0, y, probe);
  store_relu(y, out, i, probe);
}

template <class P>
void sage_node(const CsrGraph& g, const FeatureMatrix& H, const SageParams& p,
               std::size_t i, FeatureMatrix& out, P& probe) {
  const std::size_t d = H.cols();
  std::vector<Acc> hi(d), acc(d, 0.0), vh(p.V.rows()), wh(p.W.rows());
  const auto [b, e] = row_bounds(g, i, probe);
  load_row(H, ArrayId::features, i, hi, probe);
  vmm(hi, p.V, ArrayId::w_v, 0, vh, probe);
  aggregate(g, H, b, e, acc, probe);
  if (e > b) {
    const Acc deg = static_cast<Acc>(e - b);
    for (std::size_t c = 0; c < d; ++c) {
      probe.branch();
      probe.compute();
      acc[c] /= deg;
    }
  }
  vmm(acc, p.W, ArrayId::w_w, 0, wh, probe);
  for (std::size_t r = 0; r < vh.size(); ++r) {
    probe.branch();
    probe.compute();
    vh[r] += wh[r];
  }
  store_relu(vh, out, i, probe);
}

template <class P>
void gin_node(const CsrGraph& g, const FeatureMatrix& H, const GinParams& p, std::size_t i,
              FeatureMatrix& out, P& probe) {
  const std::size_t d = H.cols();
  std::vector<Acc> acc(d), t(p.V.rows()), y(p.U.rows());
  const auto [b, e] = row_bounds(g, i, probe);
  const auto hi = H.row(i);
  const Acc scale = 1.0 + static_cast<Acc>(p.eps);
  for (std::size_t c = 0; c < d; ++c) {
    probe.branch();
    probe.read(ArrayId::features, i * d + c);
    probe.compute();
    acc[c] = scale * hi[c];
  }
  aggregate(g, H, b, e, acc, probe);
  vmm(acc, p.V, ArrayId::w_v, 0, t, probe);
  for (std::size_t r = 0; r < t.size(); ++r) {
    probe.branch();
    probe.compute();
    t[r] = relu(t[r]);
  }
  vmm(t, p.U, ArrayId::w_u, 0, y, probe);
  store_relu(y, out, i, probe);
}

// Kernel-1 products of GAT, kept in memory between the two kernels:
// z = [U^1 h .. U^K h], el = a_src.z, er = a_dest.z.
struct GatIntermediate {
  FeatureMatrix z;  // n x K*d_out
  DenseMatrix el;   // n x K
  DenseMatrix er;   // n x K
};

template <class P>
void gat_project_node(const FeatureMatrix& H, const GatParams& p, std::size_t i,
                      GatIntermediate& mid, P& probe) {
  const std::size_t K = p.heads(), dout = p.U[0].rows(), din = H.cols();
  std::vector<Acc> hi(din), zk(dout);
  load_row(H, ArrayId::features, i, hi, probe);
  for (std::size_t k = 0; k < K; ++k) {
    probe.branch();
    vmm(hi, p.U[k], ArrayId::w_u, k * dout * din, zk, probe);
    Acc sl = 0.0, sr = 0.0;
    for (std::size_t c = 0; c < dout; ++c) {
      probe.branch();
      probe.write(ArrayId::z, i * K * dout + k * dout + c);
      mid.z(i, k * dout + c) = static_cast<float>(zk[c]);
      probe.read(ArrayId::att_src, k * dout + c);
      probe.read(ArrayId::att_dest, k * dout + c);
      probe.compute(4);
      sl += p.a_src(k, c) * zk[c];
      sr += p.a_dest(k, c) * zk[c];
    }
    probe.write(ArrayId::el, i * K + k);
    probe.write(ArrayId::er, i * K + k);
    mid.el(i, k) = static_cast<float>(sl);
    mid.er(i, k) = static_cast<float>(sr);
  }
}

// alpha, when given, receives attention weights as an m x K edge matrix.
template <class P>
void gat_attend_node(const CsrGraph& g, const GatParams& p, const GatIntermediate& mid,
                     std::size_t i, FeatureMatrix& out, EdgeFeatures* alpha, P& probe) {
  const std::size_t K = p.heads(), dout = p.U[0].rows();
  const auto cols = g.col_indices();
  const auto [b, e] = row_bounds(g, i, probe);
  const Acc slope = p.leaky_slope;
  std::vector<Acc> score(e - b), acc(dout);
  for (std::size_t k = 0; k < K; ++k) {
    probe.branch();
    probe.read(ArrayId::el, i * K + k);
    const Acc li = mid.el(i, k);
    Acc mx = -std::numeric_limits<Acc>::infinity();
    for (EdgeIndex q = b; q < e; ++q) {
      probe.branch();
      probe.read(ArrayId::col_indices, q);
      const NodeId j = cols[q];
      probe.read(ArrayId::er, j * K + k);
      probe.compute(3);
      const Acc s = leaky_relu(li + mid.er(j, k), slope);
      score[q - b] = s;
      mx = std::max(mx, s);
    }
    Acc sum = 0.0;
    for (EdgeIndex q = b; q < e; ++q) {
      probe.branch();
      probe.compute(3);
      score[q - b] = std::exp(score[q - b] - mx);
      sum += score[q - b];
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (EdgeIndex q = b; q < e; ++q) {
      probe.branch();
      probe.read(ArrayId::col_indices, q);
      const NodeId j = cols[q];
      probe.compute();
      const Acc a = score[q - b] / sum;
      if (alpha) (*alpha)(q, k) = static_cast<float>(a);
      const auto zj = mid.z.row(j).subspan(k * dout, dout);
      for (std::size_t c = 0; c < dout; ++c) {
        probe.branch();
        probe.read(ArrayId::z, j * K * dout + k * dout + c);
        probe.compute(2);
        acc[c] += a * zj[c];
      }
    }
    auto orow = out.row(i);
    for (std::size_t c = 0; c < dout; ++c) {
      probe.branch();
      probe.compute();
      probe.write(ArrayId::output, i * K * dout + k * dout + c);
      orow[k * dout + c] = static_cast<float>(elu(acc[c]));
    }
  }
}

// Gaussian mixture weights w_k(u) for one pseudo-coordinate pair.
template <class P>
void monet_weights(const MonetParams& p, const PseudoCoord& pc, EdgeIndex q,
                   std::span<Acc> w, P& probe) {
  probe.read(ArrayId::pseudo, 2 * q);
  probe.read(ArrayId::pseudo, 2 * q + 1);
  Acc u[2];
  for (std::size_t r = 0; r < 2; ++r) {
    probe.branch();
    Acc s = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      probe.branch();
      probe.read(ArrayId::pseudo_w, r * 2 + c);
      probe.compute(2);
      s += static_cast<Acc>(p.V2(r, c)) * pc[c];
    }
    probe.read(ArrayId::pseudo_b, r);
    probe.compute(2);
    u[r] = std::tanh(s + p.v2(0, r));
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    probe.branch();
    Acc s = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      probe.branch();
      probe.read(ArrayId::mu, k * 2 + c);
      probe.read(ArrayId::sigma_inv, k * 2 + c);
      probe.compute(4);
      const Acc diff = u[c] - p.mu(k, c);
      s += p.sigma_inv(k, c) * (diff * diff);
    }
    probe.compute(2);
    w[k] = std::exp(-0.5 * s);
  }
}

template <class P>
void monet_node(const CsrGraph& g, const FeatureMatrix& H, const MonetParams& p,
                std::span<const PseudoCoord> pseudo, std::size_t i, FeatureMatrix& out,
                P& probe) {
  const std::size_t K = p.heads(), d = H.cols(), dout = p.U[0].rows();
  const auto cols = g.col_indices();
  const auto [b, e] = row_bounds(g, i, probe);
  std::vector<Acc> acc(K * d, 0.0), w(K), y(dout), sum(dout, 0.0);
  for (EdgeIndex q = b; q < e; ++q) {
    probe.branch();
    probe.read(ArrayId::col_indices, q);
    const NodeId j = cols[q];
    monet_weights(p, pseudo[q], q, w, probe);
    const auto hj = H.row(j);
    for (std::size_t c = 0; c < d; ++c) {
      probe.branch();
      probe.read(ArrayId::features, j * d + c);
      for (std::size_t k = 0; k < K; ++k) {
        probe.branch();
        probe.compute(2);
        acc[k * d + c] += w[k] * hj[c];
      }
    }
  }
  // Node-wise projection: U^k is applied once to the per-head aggregate.
  for (std::size_t k = 0; k < K; ++k) {
    probe.branch();
    vmm(std::span<const Acc>(acc).subspan(k * d, d), p.U[k], ArrayId::w_u, k * dout * d, y,
        probe);
    for (std::size_t r = 0; r < dout; ++r) {
      probe.branch();
      probe.compute();
      sum[r] += y[r];
    }
  }
  store_relu(sum, out, i, probe);
}

template <class P>
void gated_node(const CsrGraph& g, const FeatureMatrix& H, const EdgeFeatures& E,
                const GatedParams& p, std::size_t i, FeatureMatrix& out,
                EdgeFeatures& eout, P& probe) {
  const std::size_t d = H.cols(), dout = p.A.rows();
  const auto cols = g.col_indices();
  const auto [b, e] = row_bounds(g, i, probe);
  std::vector<Acc> hi(d), hj(d), eij(E.cols()), ah(dout), eh(dout), bh(dout), dh(dout),
      ce(dout), num(dout, 0.0), den(dout, 0.0);
  load_row(H, ArrayId::features, i, hi, probe);
  vmm(hi, p.A, ArrayId::w_a, 0, ah, probe);
  vmm(hi, p.E, ArrayId::w_e, 0, eh, probe);
  for (EdgeIndex q = b; q < e; ++q) {
    probe.branch();
    probe.read(ArrayId::col_indices, q);
    const NodeId j = cols[q];
    load_row(H, ArrayId::features, j, hj, probe);
    load_row(E, ArrayId::edge_in, q, eij, probe);
    vmm(hj, p.B, ArrayId::w_b, 0, bh, probe);
    vmm(hj, p.D, ArrayId::w_d, 0, dh, probe);
    vmm(eij, p.C, ArrayId::w_c, 0, ce, probe);
    auto erow = eout.row(q);
    for (std::size_t c = 0; c < dout; ++c) {
      probe.branch();
      probe.compute(2);
      const Acc ep = eh[c] + dh[c] + ce[c];
      probe.write(ArrayId::edge_out, q * dout + c);
      erow[c] = static_cast<float>(ep);
      probe.compute(4);
      const Acc s = sigmoid(ep);
      num[c] += bh[c] * s;
      den[c] += s;
    }
  }
  for (std::size_t c = 0; c < dout; ++c) {
    probe.branch();
    probe.compute(3);
    ah[c] += num[c] / (den[c] + static_cast<Acc>(p.eps_stab));
  }
  store_relu(ah, out, i, probe);
}

}  // namespace ref

// ---- whole-layer entry points -------------------------------------------

inline FeatureMatrix gcn_forward(const CsrGraph& g, const FeatureMatrix& H,
                                 const GcnParams& p) {
  validate_params(p);
  ref::check_features(g, H, p.U.cols());
  FeatureMatrix out(g.num_nodes(), p.U.rows());
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) ref::gcn_node(g, H, p, i, out, probe);
  return out;
}

inline FeatureMatrix sage_forward(const CsrGraph& g, const FeatureMatrix& H,
                                  const SageParams& p) {
  validate_params(p);
  ref::check_features(g, H, p.V.cols());
  FeatureMatrix out(g.num_nodes(), p.V.rows());
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) ref::sage_node(g, H, p, i, out, probe);
  return out;
}

inline FeatureMatrix gin_forward(const CsrGraph& g, const FeatureMatrix& H,
                                 const GinParams& p) {
  validate_params(p);
  ref::check_features(g, H, p.U.cols());
  FeatureMatrix out(g.num_nodes(), p.U.rows());
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) ref::gin_node(g, H, p, i, out, probe);
  return out;
}

inline ref::GatIntermediate gat_project(const FeatureMatrix& H, const GatParams& p) {
  const std::size_t n = H.rows(), K = p.heads(), dout = p.U[0].rows();
  ref::GatIntermediate mid{FeatureMatrix(n, K * dout), DenseMatrix(n, K), DenseMatrix(n, K)};
  NullProbe probe;
  for (std::size_t i = 0; i < n; ++i) ref::gat_project_node(H, p, i, mid, probe);
  return mid;
}

inline FeatureMatrix gat_forward(const CsrGraph& g, const FeatureMatrix& H,
                                 const GatParams& p, EdgeFeatures* alpha = nullptr) {
  validate_params(p);
  ref::check_features(g, H, p.U[0].cols());
  const auto mid = gat_project(H, p);
  const std::size_t K = p.heads(), dout = p.U[0].rows();
  FeatureMatrix out(g.num_nodes(), K * dout);
  if (alpha) *alpha = EdgeFeatures(g.num_edges(), K);
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    ref::gat_attend_node(g, p, mid, i, out, alpha, probe);
  return out;
}

inline FeatureMatrix monet_forward(const CsrGraph& g, const FeatureMatrix& H,
                                   const MonetParams& p) {
  validate_params(p);
  ref::check_features(g, H, p.U[0].cols());
  const auto pseudo = pseudo_coordinates(g);
  FeatureMatrix out(g.num_nodes(), p.U[0].rows());
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    ref::monet_node(g, H, p, pseudo, i, out, probe);
  return out;
}

struct GatedOutput {
  FeatureMatrix nodes;
  EdgeFeatures edges;
};

inline GatedOutput gatedgcn_forward(const CsrGraph& g, const FeatureMatrix& H,
                                    const EdgeFeatures& E, const GatedParams& p) {
  validate_params(p);
  ref::check_features(g, H, p.A.cols());
  if (E.rows() != g.num_edges() || E.cols() != p.C.cols())
    throw DimensionError("edge features must be m x d_in");
  GatedOutput res{FeatureMatrix(g.num_nodes(), p.A.rows()),
                  EdgeFeatures(g.num_edges(), p.A.rows())};
  NullProbe probe;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    ref::gated_node(g, H, E, p, i, res.nodes, res.edges, probe);
  return res;
}

// Result of one layer for any model.
struct LayerOutput {
  FeatureMatrix output;
  EdgeFeatures edge_output;  // GatedGCN only
  EdgeFeatures attention;    // GAT only, m x K
};

inline LayerOutput reference_forward(const CsrGraph& g, const FeatureMatrix& H,
                                     const ModelParams& params,
                                     const EdgeFeatures& edge_features = {}) {
  LayerOutput res;
  switch (kind_of(params)) {
    case ModelKind::gcn: res.output = gcn_forward(g, H, std::get<GcnParams>(params)); break;
    case ModelKind::graphsage:
      res.output = sage_forward(g, H, std::get<SageParams>(params));
      break;
    case ModelKind::gin: res.output = gin_forward(g, H, std::get<GinParams>(params)); break;
    case ModelKind::gat:
      res.output = gat_forward(g, H, std::get<GatParams>(params), &res.attention);
      break;
    case ModelKind::monet:
      res.output = monet_forward(g, H, std::get<MonetParams>(params));
      break;
    case ModelKind::gatedgcn: {
      auto r = gatedgcn_forward(g, H, edge_features, std::get<GatedParams>(params));
      res.output = std::move(r.nodes);
      res.edge_output = std::move(r.edges);
      break;
    }
  }
  return res;
}

}  // namespace gnnhls
