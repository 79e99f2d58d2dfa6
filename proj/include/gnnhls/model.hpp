#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>

#include "gnnhls/error.hpp"

namespace gnnhls {

enum class ModelKind { gcn, graphsage, gin, gat, monet, gatedgcn };

inline constexpr std::array<ModelKind, 6> kAllModels = {
    ModelKind::gcn, ModelKind::graphsage, ModelKind::gin,
    ModelKind::gat, ModelKind::monet,     ModelKind::gatedgcn};

inline constexpr bool is_anisotropic(ModelKind k) noexcept {
  return k == ModelKind::gat || k == ModelKind::monet || k == ModelKind::gatedgcn;
}

inline std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::graphsage: return "graphsage";
    case ModelKind::gin: return "gin";
    case ModelKind::gat: return "gat";
    case ModelKind::monet: return "monet";
    case ModelKind::gatedgcn: return "gatedgcn";
  }
  return "?";
}

// Short names used in the baseline tables.
inline std::string_view table_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::gcn: return "GCN";
    case ModelKind::graphsage: return "GS";
    case ModelKind::gin: return "GIN";
    case ModelKind::gat: return "GAT";
    case ModelKind::monet: return "MN";
    case ModelKind::gatedgcn: return "GGCN";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "gcn") return ModelKind::gcn;
  if (s == "graphsage" || s == "sage" || s == "gs") return ModelKind::graphsage;
  if (s == "gin") return ModelKind::gin;
  if (s == "gat") return ModelKind::gat;
  if (s == "monet" || s == "mn") return ModelKind::monet;
  if (s == "gatedgcn" || s == "ggcn") return ModelKind::gatedgcn;
  throw Error("unknown model '" + std::string(name) + "'");
}

// in: input feature width. heads: K for GAT/MoNet, 1 otherwise.
// out: per-head output width (GAT) or layer width (the rest).
struct Dims {
  std::size_t in = 0;
  std::size_t heads = 1;
  std::size_t out = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

inline Dims default_dims(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::gat: return {128, 8, 16};
    case ModelKind::monet: return {64, 2, 64};
    case ModelKind::gatedgcn: return {32, 1, 32};
    default: return {128, 1, 128};
  }
}

// Square layer of width d; heads default to the model's usual count.
inline Dims square_dims(ModelKind k, std::size_t d) noexcept {
  switch (k) {
    case ModelKind::gat: return {d, 8, d};
    case ModelKind::monet: return {d, 2, d};
    default: return {d, 1, d};
  }
}

inline std::size_t output_width(ModelKind k, const Dims& d) noexcept {
  return k == ModelKind::gat ? d.heads * d.out : d.out;
}

inline void validate_dims(ModelKind k, const Dims& d) {
  if (d.in == 0 || d.out == 0 || d.heads == 0)
    throw DimensionError("dimensions must be positive");
  const bool multi_head = k == ModelKind::gat || k == ModelKind::monet;
  if (!multi_head && d.heads != 1)
    throw DimensionError(std::string(to_string(k)) + " takes a single head");
  if (k != ModelKind::gat && d.in != d.out)
    throw DimensionError(std::string(to_string(k)) +
                         " requires square weights (in == out)");
}

inline std::size_t default_num_cus(ModelKind k) noexcept {
  return (k == ModelKind::gcn || k == ModelKind::monet) ? 2 : 1;
}

}  // namespace gnnhls
