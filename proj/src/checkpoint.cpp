// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/checkpoint.hpp"

#include "torf/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace torf {

namespace {

constexpr const char* kMagic = "TORFCKPT 1\n";

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (sizeof(U) - 1 - i));
    return r;
  }
  return v;
}

void write_floats(std::ofstream& out, std::span<const double> values) {
  std::vector<std::uint32_t> bits(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    bits[i] = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
}

void read_floats(std::ifstream& in, std::span<double> values, const std::string& what) {
  std::vector<std::uint32_t> bits(values.size());
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
  if (!in) throw FormatError("truncated " + what + " parameters");
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<double>(std::bit_cast<float>(to_little(bits[i])));
}

nlohmann::json activations_json(const Activations& a) {
  return {{"density", "softplus"}, {"rgb", "sigmoid"}, {"ir", "softplus"}, {"blend", "sigmoid"},
          {"density_scale", a.density_scale}, {"radiance_max", a.radiance_max}, {"ir_scale", a.ir_scale}};
}

Activations activations_from(const nlohmann::json& j) {
  Activations a;
  a.density_scale = j.at("density_scale").get<double>();
  a.radiance_max = j.at("radiance_max").get<double>();
  a.ir_scale = j.at("ir_scale").get<double>();
  return a;
}

nlohmann::json grid_json(const GridShape& s, const Activations& a) {
  return {{"resolution", s.resolution},
          {"time_steps", s.time_steps},
          {"box_min", to_json(s.box_min)},
          {"box_max", to_json(s.box_max)},
          {"activations", activations_json(a)}};
}

nlohmann::json vec3_list(const std::vector<Vec3>& v) {
  nlohmann::json j = nlohmann::json::array();
  for (const Vec3& x : v) j.push_back(to_json(x));
  return j;
}

std::vector<Vec3> vec3_list_from(const nlohmann::json& j) {
  std::vector<Vec3> out;
  for (const auto& x : j) out.push_back(vec3_from_json(x));
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const RadianceFieldSet& f = ckpt.fields;
  nlohmann::json header{
      {"static", grid_json(f.stat.grid().shape(), f.stat.activations())},
      {"use_dynamic", f.use_dynamic},
      {"rig", to_json(ckpt.rig)},
      {"times", ckpt.times},
      {"n_samples", ckpt.n_samples},
      {"poses",
       {{"rotation", vec3_list(ckpt.poses.rotation)},
        {"translation", vec3_list(ckpt.poses.translation)},
        {"rel_rotation", to_json(ckpt.poses.rel_rotation)},
        {"rel_translation", to_json(ckpt.poses.rel_translation)}}}};
  if (f.dyn) header["dynamic"] = grid_json(f.dyn->grid().shape(), f.dyn->activations());
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
  const std::uint64_t size = to_little<std::uint64_t>(text.size());
  out.write(reinterpret_cast<const char*>(&size), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_floats(out, f.stat.grid().params());
  if (f.dyn) write_floats(out, f.dyn->grid().params());
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  const std::string where = "'" + path.string() + "': ";
  std::string magic(std::strlen(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) throw FormatError(where + "not a checkpoint (bad magic)");
  std::uint64_t size = 0;
  in.read(reinterpret_cast<char*>(&size), 8);
  size = to_little(size);
  if (!in || size > (1u << 30)) throw FormatError(where + "bad header size");
  std::string text(size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(size));
  if (!in) throw FormatError(where + "truncated header");

  Checkpoint ckpt;
  try {
    const nlohmann::json h = nlohmann::json::parse(text);
    const auto& sj = h.at("static");
    ckpt.fields.stat = StaticField(sj.at("resolution").get<std::array<int, 3>>(),
                                   vec3_from_json(sj.at("box_min")), vec3_from_json(sj.at("box_max")),
                                   activations_from(sj.at("activations")));
    if (h.contains("dynamic")) {
      const auto& dj = h.at("dynamic");
      ckpt.fields.dyn = DynamicField(dj.at("resolution").get<std::array<int, 3>>(),
                                     dj.at("time_steps").get<int>(), vec3_from_json(dj.at("box_min")),
                                     vec3_from_json(dj.at("box_max")), activations_from(dj.at("activations")));
    }
    ckpt.fields.use_dynamic = h.value("use_dynamic", true);
    ckpt.rig = rig_from_json(h.at("rig"));
    ckpt.times = h.value("times", std::vector<double>{});
    ckpt.n_samples = h.value("n_samples", 64);
    const auto& pj = h.at("poses");
    ckpt.poses.rotation = vec3_list_from(pj.at("rotation"));
    ckpt.poses.translation = vec3_list_from(pj.at("translation"));
    ckpt.poses.rel_rotation = vec3_from_json(pj.at("rel_rotation"));
    ckpt.poses.rel_translation = vec3_from_json(pj.at("rel_translation"));
    if (ckpt.poses.rotation.size() != ckpt.poses.translation.size())
      throw FormatError("poses: rotation/translation count mismatch");
    read_floats(in, ckpt.fields.stat.grid().params(), "static");
    if (ckpt.fields.dyn) read_floats(in, ckpt.fields.dyn->grid().params(), "dynamic");
  } catch (const std::exception& e) {
    throw FormatError(where + e.what());
  }
  return ckpt;
}

}  // namespace torf
