// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/scene.hpp"
#include "splatkit/types.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace splat {

// Minimal PLY vertex-table reader: ASCII or binary little-endian, scalar
// properties only, vertex element first. Every value is widened to double;
// integer-typed columns remember their origin so color channels can be
// rescaled from 0..255.
struct PlyVertexTable {
  int count = 0;
  std::vector<std::string> names;
  std::vector<bool> is_integer;
  std::vector<std::vector<double>> columns;

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  const std::vector<double>& column(const std::string& name, const std::string& context) const {
    const int i = find(name);
    require(i >= 0, context + ": missing property '" + name + "'");
    return columns[i];
  }
};

namespace detail {

struct PlyPropDesc {
  std::string name;
  int size = 0;
  bool integer = false;
  bool floating = false;
};

inline PlyPropDesc ply_prop_desc(const std::string& type, const std::string& name) {
  PlyPropDesc d;
  d.name = name;
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") {
    d.size = 1;
    d.integer = true;
  } else if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") {
    d.size = 2;
    d.integer = true;
  } else if (type == "int" || type == "int32" || type == "uint" || type == "uint32") {
    d.size = 4;
    d.integer = true;
  } else if (type == "float" || type == "float32") {
    d.size = 4;
    d.floating = true;
  } else if (type == "double" || type == "float64") {
    d.size = 8;
    d.floating = true;
  } else {
    throw std::runtime_error("ply: unsupported property type '" + type + "'");
  }
  return d;
}

inline double ply_read_binary_value(const char* p, const PlyPropDesc& d, const std::string& type) {
  if (d.floating && d.size == 4) {
    float v;
    std::memcpy(&v, p, 4);
    return v;
  }
  if (d.floating) {
    double v;
    std::memcpy(&v, p, 8);
    return v;
  }
  const bool is_signed = type[0] != 'u';
  switch (d.size) {
    case 1: {
      if (is_signed) { std::int8_t v; std::memcpy(&v, p, 1); return v; }
      std::uint8_t v; std::memcpy(&v, p, 1); return v;
    }
    case 2: {
      if (is_signed) { std::int16_t v; std::memcpy(&v, p, 2); return v; }
      std::uint16_t v; std::memcpy(&v, p, 2); return v;
    }
    default: {
      if (is_signed) { std::int32_t v; std::memcpy(&v, p, 4); return v; }
      std::uint32_t v; std::memcpy(&v, p, 4); return v;
    }
  }
}

}  // namespace detail

inline PlyVertexTable read_ply_vertices(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "ply: cannot open '" + path + "'");

  std::string line;
  require(std::getline(in, line) && (line == "ply" || line == "ply\r"),
          "ply: '" + path + "' does not start with a ply magic line");

  bool binary = false, format_seen = false, in_vertex = false;
  int vertex_count = -1;
  std::vector<detail::PlyPropDesc> props;
  std::vector<std::string> prop_types;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw std::runtime_error("ply: unsupported format '" + fmt + "' in '" + path + "'");
      format_seen = true;
    } else if (tok == "element") {
      std::string name;
      int count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        require(props.empty(), "ply: vertex element must come first in '" + path + "'");
        vertex_count = count;
        in_vertex = true;
      } else {
        require(vertex_count >= 0, "ply: vertex element must come first in '" + path + "'");
        in_vertex = false;
      }
    } else if (tok == "property") {
      if (!in_vertex) continue;  // non-vertex elements are ignored
      std::string type;
      ls >> type;
      require(type != "list", "ply: list properties are not supported on vertices");
      std::string name;
      ls >> name;
      props.push_back(detail::ply_prop_desc(type, name));
      prop_types.push_back(type);
    } else if (tok == "end_header") {
      break;
    } else {
      throw std::runtime_error("ply: unexpected header token '" + tok + "' in '" + path + "'");
    }
  }
  require(format_seen, "ply: missing format line in '" + path + "'");
  require(vertex_count >= 0, "ply: missing vertex element in '" + path + "'");

  PlyVertexTable table;
  table.count = vertex_count;
  for (size_t i = 0; i < props.size(); ++i) {
    table.names.push_back(props[i].name);
    table.is_integer.push_back(props[i].integer);
    table.columns.emplace_back();
    table.columns.back().reserve(vertex_count);
  }

  if (binary) {
    size_t stride = 0;
    for (const auto& p : props) stride += p.size;
    std::vector<char> row(stride);
    for (int v = 0; v < vertex_count; ++v) {
      in.read(row.data(), static_cast<std::streamsize>(stride));
      require(in.gcount() == static_cast<std::streamsize>(stride),
              "ply: truncated vertex data in '" + path + "'");
      size_t off = 0;
      for (size_t i = 0; i < props.size(); ++i) {
        table.columns[i].push_back(
            detail::ply_read_binary_value(row.data() + off, props[i], prop_types[i]));
        off += props[i].size;
      }
    }
  } else {
    for (int v = 0; v < vertex_count; ++v) {
      for (size_t i = 0; i < props.size(); ++i) {
        double value;
        require(static_cast<bool>(in >> value), "ply: truncated vertex data in '" + path + "'");
        table.columns[i].push_back(value);
      }
    }
  }
  return table;
}

// --- init point cloud (x,y,z + 8-bit rgb) ------------------------------

template <typename T>
inline std::vector<std::pair<Vec3<T>, Vec3<T>>> read_points_ply(const std::string& path) {
  const PlyVertexTable t = read_ply_vertices(path);
  const auto& x = t.column("x", "points3d");
  const auto& y = t.column("y", "points3d");
  const auto& z = t.column("z", "points3d");
  const auto& r = t.column("red", "points3d");
  const auto& g = t.column("green", "points3d");
  const auto& b = t.column("blue", "points3d");
  const double color_scale = t.is_integer[t.find("red")] ? 1.0 / 255 : 1.0;
  std::vector<std::pair<Vec3<T>, Vec3<T>>> out;
  out.reserve(t.count);
  for (int i = 0; i < t.count; ++i)
    out.push_back({Vec3<T>(T(x[i]), T(y[i]), T(z[i])),
                   Vec3<T>(T(r[i] * color_scale), T(g[i] * color_scale), T(b[i] * color_scale))});
  return out;
}

template <typename T>
inline void write_points_ply(const std::string& path,
                             const std::vector<std::pair<Vec3<T>, Vec3<T>>>& points) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "ply: cannot open '" + path + "' for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& [pos, color] : points) {
    const float xyz[3] = {static_cast<float>(pos[0]), static_cast<float>(pos[1]),
                          static_cast<float>(pos[2])};
    out.write(reinterpret_cast<const char*>(xyz), 12);
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(color[c]), 0.0, 1.0);
      const std::uint8_t byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
}

// --- scene checkpoints ---------------------------------------------------

// De-facto splatting checkpoint layout: binary little-endian float32
// vertices with zero normals, DC and rest SH coefficients (rest stored
// channel-major), logit opacity, log scales and the wxyz rotation.
template <typename T>
inline void save_checkpoint(const Scene<T>& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot open '" + path + "' for writing");
  const int n_sh = sh_coeff_count(scene.sh_degree);
  const int n_rest = 3 * (n_sh - 1);

  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.gaussians.size()
      << "\n";
  for (const char* f : {"x", "y", "z", "nx", "ny", "nz"}) out << "property float " << f << "\n";
  for (int i = 0; i < 3; ++i) out << "property float f_dc_" << i << "\n";
  for (int i = 0; i < n_rest; ++i) out << "property float f_rest_" << i << "\n";
  out << "property float opacity\n";
  for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
  for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
  out << "end_header\n";

  std::vector<float> row(6 + 3 + n_rest + 1 + 3 + 4);
  for (const auto& g : scene.gaussians) {
    size_t k = 0;
    for (int i = 0; i < 3; ++i) row[k++] = static_cast<float>(g.mu[i]);
    for (int i = 0; i < 3; ++i) row[k++] = 0.0f;  // normals
    for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(g.sh(0, c));
    for (int c = 0; c < 3; ++c)
      for (int m = 1; m < n_sh; ++m) row[k++] = static_cast<float>(g.sh(m, c));
    row[k++] = static_cast<float>(g.opacity_logit);
    for (int i = 0; i < 3; ++i) row[k++] = static_cast<float>(g.log_scale[i]);
    for (int i = 0; i < 4; ++i) row[k++] = static_cast<float>(g.rot[i]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

template <typename T>
inline Scene<T> load_checkpoint(const std::string& path) {
  const PlyVertexTable t = read_ply_vertices(path);

  int n_rest = 0;
  while (t.find("f_rest_" + std::to_string(n_rest)) >= 0) ++n_rest;
  require(n_rest % 3 == 0, "checkpoint: f_rest count must be divisible by 3");
  const int rest_coeffs = n_rest / 3;
  int degree = -1;
  for (int d = 0; d <= 3; ++d)
    if (sh_coeff_count(d) - 1 == rest_coeffs) degree = d;
  require(degree >= 0, "checkpoint: f_rest count " + std::to_string(n_rest) +
                           " does not match any SH degree 0..3");

  const auto& x = t.column("x", "checkpoint");
  const auto& y = t.column("y", "checkpoint");
  const auto& z = t.column("z", "checkpoint");
  const auto& opacity = t.column("opacity", "checkpoint");
  const std::vector<double>* dc[3];
  const std::vector<double>* scale[3];
  const std::vector<double>* rot[4];
  for (int i = 0; i < 3; ++i) dc[i] = &t.column("f_dc_" + std::to_string(i), "checkpoint");
  for (int i = 0; i < 3; ++i) scale[i] = &t.column("scale_" + std::to_string(i), "checkpoint");
  for (int i = 0; i < 4; ++i) rot[i] = &t.column("rot_" + std::to_string(i), "checkpoint");
  std::vector<const std::vector<double>*> rest(n_rest);
  for (int i = 0; i < n_rest; ++i) rest[i] = &t.column("f_rest_" + std::to_string(i), "checkpoint");

  Scene<T> scene;
  scene.sh_degree = degree;
  const int n_sh = sh_coeff_count(degree);
  scene.gaussians.resize(t.count);
  for (int i = 0; i < t.count; ++i) {
    Gaussian3D<T>& g = scene.gaussians[i];
    g.mu = Vec3<T>(T(x[i]), T(y[i]), T(z[i]));
    g.sh = ShMatrix<T>::Zero(n_sh, 3);
    for (int c = 0; c < 3; ++c) g.sh(0, c) = T((*dc[c])[i]);
    for (int c = 0; c < 3; ++c)
      for (int m = 1; m < n_sh; ++m) g.sh(m, c) = T((*rest[c * (n_sh - 1) + (m - 1)])[i]);
    g.opacity_logit = T(opacity[i]);
    g.log_scale = Vec3<T>(T((*scale[0])[i]), T((*scale[1])[i]), T((*scale[2])[i]));
    g.rot = Vec4<T>(T((*rot[0])[i]), T((*rot[1])[i]), T((*rot[2])[i]), T((*rot[3])[i]));
  }
  return scene;
}

}  // namespace splat
