#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace gnnhls {

// Global arrays a reference kernel can touch. Locals (accumulators, per-row
// scratch) are registers as far as tracing is concerned.
enum class ArrayId : std::uint8_t {
  row_offsets,
  col_indices,
  features,
  output,
  w_u,
  w_v,
  w_w,
  w_a,
  w_b,
  w_c,
  w_d,
  w_e,
  att_src,
  att_dest,
  z,
  el,
  er,
  pseudo,
  pseudo_w,
  pseudo_b,
  mu,
  sigma_inv,
  edge_in,
  edge_out,
  count_
};

inline constexpr std::size_t kArrayCount = static_cast<std::size_t>(ArrayId::count_);

inline constexpr std::array<std::string_view, kArrayCount> kArrayNames = {
    "row_offsets", "col_indices", "features", "output",   "U",      "V",
    "W",           "A",           "B",        "C",        "D",      "E",
    "a_src",       "a_dest",      "z",        "el",       "er",     "pseudo",
    "V2",          "v2",          "mu",       "sigma_inv", "edge_in", "edge_out"};

// Probe concept used by the reference kernels:
//   branch()                one loop-iteration boundary
//   read(id, index)         element read from a global array
//   write(id, index)        element write to a global array
//   compute(count)          scalar arithmetic or activation operations
struct NullProbe {
  static constexpr bool enabled = false;
  constexpr void branch() noexcept {}
  constexpr void read(ArrayId, std::size_t) noexcept {}
  constexpr void write(ArrayId, std::size_t) noexcept {}
  constexpr void compute(std::size_t = 1) noexcept {}
};

}  // namespace gnnhls
