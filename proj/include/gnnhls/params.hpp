#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "gnnhls/error.hpp"
#include "gnnhls/model.hpp"
#include "gnnhls/rng.hpp"
#include "gnnhls/tensor.hpp"

namespace gnnhls {

struct GcnParams {
  DenseMatrix U;
};

struct SageParams {
  DenseMatrix V;  // target path
  DenseMatrix W;  // neighbor path
};

struct GinParams {
  DenseMatrix U;
  DenseMatrix V;
  float eps = 0.0f;
};

struct GatParams {
  std::vector<DenseMatrix> U;  // K matrices, d_out x d_in
  DenseMatrix a_src;           // K x d_out
  DenseMatrix a_dest;          // K x d_out
  float leaky_slope = 0.2f;

  std::size_t heads() const noexcept { return U.size(); }
};

struct MonetParams {
  DenseMatrix V2;         // 2 x 2
  DenseMatrix v2;         // 1 x 2
  DenseMatrix mu;         // K x 2
  DenseMatrix sigma_inv;  // K x 2, diagonal of the inverse covariance
  std::vector<DenseMatrix> U;

  std::size_t heads() const noexcept { return U.size(); }
};

struct GatedParams {
  DenseMatrix A, B, C, D, E;
  float eps_stab = 1e-6f;
};

using ModelParams =
    std::variant<GcnParams, SageParams, GinParams, GatParams, MonetParams, GatedParams>;

inline ModelKind kind_of(const ModelParams& p) noexcept {
  return static_cast<ModelKind>(p.index());
}

namespace detail {

inline void require_shape(const DenseMatrix& m, std::size_t r, std::size_t c,
                          const char* name) {
  if (m.rows() != r || m.cols() != c)
    throw DimensionError(std::string(name) + " must be " + std::to_string(r) + "x" +
                         std::to_string(c) + ", got " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()));
}

}  // namespace detail

template <class T>
inline constexpr ModelKind kind_of_v =
    std::is_same_v<T, GcnParams>    ? ModelKind::gcn
    : std::is_same_v<T, SageParams> ? ModelKind::graphsage
    : std::is_same_v<T, GinParams>  ? ModelKind::gin
    : std::is_same_v<T, GatParams>  ? ModelKind::gat
    : std::is_same_v<T, MonetParams> ? ModelKind::monet
                                     : ModelKind::gatedgcn;

// Dimensions implied by a parameter set.
template <class T>
Dims dims_of(const T& p) {
  if constexpr (std::is_same_v<T, ModelParams>) {
    return std::visit([](const auto& q) { return dims_of(q); }, p);
  } else if constexpr (std::is_same_v<T, GatParams> || std::is_same_v<T, MonetParams>) {
    if (p.U.empty()) throw DimensionError("at least one head is required");
    return {p.U[0].cols(), p.U.size(), p.U[0].rows()};
  } else if constexpr (std::is_same_v<T, SageParams>) {
    return {p.V.cols(), 1, p.V.rows()};
  } else if constexpr (std::is_same_v<T, GatedParams>) {
    return {p.A.cols(), 1, p.A.rows()};
  } else {
    return {p.U.cols(), 1, p.U.rows()};
  }
}

template <class T>
void validate_params(const T& p) {
  if constexpr (std::is_same_v<T, ModelParams>) {
    std::visit([](const auto& q) { validate_params(q); }, p);
  } else {
    const Dims d = dims_of(p);
    validate_dims(kind_of_v<T>, d);
    if constexpr (std::is_same_v<T, GcnParams>) {
      detail::require_shape(p.U, d.out, d.in, "U");
    } else if constexpr (std::is_same_v<T, SageParams>) {
      detail::require_shape(p.V, d.out, d.in, "V");
      detail::require_shape(p.W, d.out, d.in, "W");
    } else if constexpr (std::is_same_v<T, GinParams>) {
      detail::require_shape(p.U, d.out, d.in, "U");
      detail::require_shape(p.V, d.out, d.in, "V");
    } else if constexpr (std::is_same_v<T, GatParams>) {
      for (const auto& u : p.U) detail::require_shape(u, d.out, d.in, "U^k");
      detail::require_shape(p.a_src, d.heads, d.out, "a_src");
      detail::require_shape(p.a_dest, d.heads, d.out, "a_dest");
    } else if constexpr (std::is_same_v<T, MonetParams>) {
      for (const auto& u : p.U) detail::require_shape(u, d.out, d.in, "U^k");
      detail::require_shape(p.V2, 2, 2, "V2");
      detail::require_shape(p.v2, 1, 2, "v2");
      detail::require_shape(p.mu, d.heads, 2, "mu");
      detail::require_shape(p.sigma_inv, d.heads, 2, "sigma_inv");
    } else {
      for (const auto* m : {&p.A, &p.B, &p.C, &p.D, &p.E})
        detail::require_shape(*m, d.out, d.in, "A..E");
    }
  }
}

// Seeded parameters, drawn in declaration order. sigma_inv is drawn from
// [0, 1) so the mixture weights stay in (0, 1].
inline ModelParams make_params(ModelKind kind, const Dims& d, std::uint64_t seed) {
  validate_dims(kind, d);
  SplitMix64 rng(seed);
  auto mat = [&](std::size_t r, std::size_t c) { return DenseMatrix::random(r, c, rng); };
  switch (kind) {
    case ModelKind::gcn: return GcnParams{mat(d.out, d.in)};
    case ModelKind::graphsage: {
      SageParams p;
      p.V = mat(d.out, d.in);
      p.W = mat(d.out, d.in);
      return p;
    }
    case ModelKind::gin: {
      GinParams p;
      p.U = mat(d.out, d.in);
      p.V = mat(d.out, d.in);
      return p;
    }
    case ModelKind::gat: {
      GatParams p;
      for (std::size_t k = 0; k < d.heads; ++k) p.U.push_back(mat(d.out, d.in));
      p.a_src = mat(d.heads, d.out);
      p.a_dest = mat(d.heads, d.out);
      return p;
    }
    case ModelKind::monet: {
      MonetParams p;
      p.V2 = mat(2, 2);
      p.v2 = mat(1, 2);
      p.mu = mat(d.heads, 2);
      p.sigma_inv = DenseMatrix(d.heads, 2);
      for (auto& v : p.sigma_inv.data()) v = rng.unit();
      for (std::size_t k = 0; k < d.heads; ++k) p.U.push_back(mat(d.out, d.in));
      return p;
    }
    case ModelKind::gatedgcn: {
      GatedParams p;
      p.A = mat(d.out, d.in);
      p.B = mat(d.out, d.in);
      p.C = mat(d.out, d.in);
      p.D = mat(d.out, d.in);
      p.E = mat(d.out, d.in);
      return p;
    }
  }
  throw Error("unknown model");
}

inline FeatureMatrix make_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return FeatureMatrix::random(n, d, rng);
}

inline EdgeFeatures make_edge_features(std::size_t m, std::size_t d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return EdgeFeatures::random(m, d, rng);
}

// Inputs derived from one seed: features use seed, parameters seed+1 and
// edge features seed+2.
struct Fixture {
  FeatureMatrix H;
  ModelParams params;
  EdgeFeatures edge;  // empty unless the model consumes edge features
};

inline Fixture make_fixture(ModelKind kind, const Dims& d, std::size_t n,
                            std::size_t m, std::uint64_t seed) {
  Fixture f{make_features(n, d.in, seed), make_params(kind, d, seed + 1), {}};
  if (kind == ModelKind::gatedgcn) f.edge = make_edge_features(m, d.in, seed + 2);
  return f;
}

// Flat named view used for serialization.
struct NamedTensor {
  std::string name;
  DenseMatrix value;
};

struct NamedScalar {
  std::string name;
  float value;
};

inline std::vector<NamedTensor> named_tensors(const ModelParams& params) {
  std::vector<NamedTensor> out;
  auto heads = [&](const std::vector<DenseMatrix>& us) {
    for (std::size_t k = 0; k < us.size(); ++k)
      out.push_back({"U." + std::to_string(k), us[k]});
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GcnParams>) {
          out.push_back({"U", p.U});
        } else if constexpr (std::is_same_v<T, SageParams>) {
          out.push_back({"V", p.V});
          out.push_back({"W", p.W});
        } else if constexpr (std::is_same_v<T, GinParams>) {
          out.push_back({"U", p.U});
          out.push_back({"V", p.V});
        } else if constexpr (std::is_same_v<T, GatParams>) {
          heads(p.U);
          out.push_back({"a_src", p.a_src});
          out.push_back({"a_dest", p.a_dest});
        } else if constexpr (std::is_same_v<T, MonetParams>) {
          out.push_back({"V2", p.V2});
          out.push_back({"v2", p.v2});
          out.push_back({"mu", p.mu});
          out.push_back({"sigma_inv", p.sigma_inv});
          heads(p.U);
        } else {
          out.push_back({"A", p.A});
          out.push_back({"B", p.B});
          out.push_back({"C", p.C});
          out.push_back({"D", p.D});
          out.push_back({"E", p.E});
        }
      },
      params);
  return out;
}

inline std::vector<NamedScalar> named_scalars(const ModelParams& params) {
  if (auto* p = std::get_if<GinParams>(&params)) return {{"eps", p->eps}};
  if (auto* p = std::get_if<GatParams>(&params)) return {{"leaky_slope", p->leaky_slope}};
  if (auto* p = std::get_if<GatedParams>(&params)) return {{"eps_stab", p->eps_stab}};
  return {};
}

}  // namespace gnnhls
