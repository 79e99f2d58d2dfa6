#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "gnnhls/error.hpp"
#include "gnnhls/params.hpp"
#include "gnnhls/tensor.hpp"

namespace gnnhls {

inline constexpr std::array<char, 4> kTensorMagic = {'G', 'N', 'N', 'H'};
inline constexpr std::uint8_t kTensorVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated tensor header");
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
         std::uint32_t{b[3]} << 24;
}

}  // namespace detail

template <class Tag>
void write_tensor(const std::filesystem::path& path, const BasicMatrix<Tag>& m) {
  if (m.rows() > 0xFFFFFFFFu || m.cols() > 0xFFFFFFFFu)
    throw RangeError("tensor too large for the 32-bit header");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write(kTensorMagic.data(), 4);
  os.put(static_cast<char>(kTensorVersion));
  detail::put_u32(os, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (float v : m.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
  if (!os) throw Error("write failed: " + path.string());
}

template <class Tag = WeightTag>
BasicMatrix<Tag> read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kTensorMagic)
    throw Error(path.string() + ": not a tensor file (bad magic)");
  const int version = is.get();
  if (version != kTensorVersion)
    throw Error(path.string() + ": unsupported tensor version " + std::to_string(version));
  const std::uint32_t rows = detail::get_u32(is);
  const std::uint32_t cols = detail::get_u32(is);
  std::vector<float> data(std::size_t{rows} * cols);
  for (auto& v : data) v = std::bit_cast<float>(detail::get_u32(is));
  return BasicMatrix<Tag>(rows, cols, std::move(data));
}

// Writes one file per tensor plus manifest.json; returns the manifest path.
inline std::filesystem::path save_params(const std::filesystem::path& dir,
                                         const ModelParams& params) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["model"] = std::string(to_string(kind_of(params)));
  const Dims d = dims_of(params);
  manifest["dims"] = {{"in", d.in}, {"heads", d.heads}, {"out", d.out}};
  manifest["tensors"] = nlohmann::json::object();
  for (const auto& t : named_tensors(params)) {
    const std::string file = t.name + ".gnnh";
    write_tensor(dir / file, t.value);
    manifest["tensors"][t.name] = file;
  }
  manifest["scalars"] = nlohmann::json::object();
  for (const auto& s : named_scalars(params)) manifest["scalars"][s.name] = s.value;
  const auto path = dir / "manifest.json";
  std::ofstream(path) << manifest.dump(2) << '\n';
  return path;
}

inline ModelParams load_params(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad manifest " + manifest_path.string() + ": " + e.what());
  }
  const auto dir = manifest_path.parent_path();
  const ModelKind kind = parse_model_kind(j.at("model").get<std::string>());
  const auto& tensors = j.at("tensors");
  auto tensor = [&](const std::string& name) {
    if (!tensors.contains(name)) throw Error("manifest lacks tensor '" + name + "'");
    return read_tensor(dir / tensors.at(name).get<std::string>());
  };
  auto heads = [&] {
    std::vector<DenseMatrix> us;
    for (std::size_t k = 0; tensors.contains("U." + std::to_string(k)); ++k)
      us.push_back(tensor("U." + std::to_string(k)));
    return us;
  };
  const auto scalars = j.value("scalars", nlohmann::json::object());
  ModelParams params;
  switch (kind) {
    case ModelKind::gcn: params = GcnParams{tensor("U")}; break;
    case ModelKind::graphsage: params = SageParams{tensor("V"), tensor("W")}; break;
    case ModelKind::gin:
      params = GinParams{tensor("U"), tensor("V"), scalars.value("eps", 0.0f)};
      break;
    case ModelKind::gat:
      params = GatParams{heads(), tensor("a_src"), tensor("a_dest"),
                         scalars.value("leaky_slope", 0.2f)};
      break;
    case ModelKind::monet:
      params = MonetParams{tensor("V2"), tensor("v2"), tensor("mu"), tensor("sigma_inv"),
                           heads()};
      break;
    case ModelKind::gatedgcn:
      params = GatedParams{tensor("A"), tensor("B"), tensor("C"), tensor("D"), tensor("E"),
                           scalars.value("eps_stab", 1e-6f)};
      break;
  }
  validate_params(params);
  return params;
}

}  // namespace gnnhls
