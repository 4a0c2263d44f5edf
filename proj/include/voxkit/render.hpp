#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/volume.hpp"

namespace voxkit {

inline void write_pgm(const std::string& path, int width, int height,
                      const std::vector<std::uint8_t>& pixels) {
  require(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) == pixels.size(),
          ErrorKind::LengthMismatch, "pixel buffer does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoFailure, "cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  out.flush();
  require(out.good(), ErrorKind::IoFailure, "write failed for " + path);
}

namespace detail {

// 2D slice of frame 0 perpendicular to `axis`; returns (width, height, values)
struct Slice {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, row 0 first
};

inline Slice extract_slice(const Volume4D& vol, int axis, int index) {
  require(axis >= 0 && axis <= 2, ErrorKind::BadSlice, "axis must be 0, 1 or 2");
  require(index >= 0 && index < vol.shape()[static_cast<std::size_t>(axis)], ErrorKind::BadSlice,
          "slice index out of range");
  Slice s;
  switch (axis) {
    case 2:
      s.width = vol.nx();
      s.height = vol.ny();
      s.values.resize(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height));
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
          s.values[static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) +
                   static_cast<std::size_t>(x)] = vol.at(x, y, index, 0);
      break;
    case 1:
      s.width = vol.nx();
      s.height = vol.nz();
      s.values.resize(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height));
      for (int z = 0; z < s.height; ++z)
        for (int x = 0; x < s.width; ++x)
          s.values[static_cast<std::size_t>(z) * static_cast<std::size_t>(s.width) +
                   static_cast<std::size_t>(x)] = vol.at(x, index, z, 0);
      break;
    default:
      s.width = vol.ny();
      s.height = vol.nz();
      s.values.resize(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height));
      for (int z = 0; z < s.height; ++z)
        for (int y = 0; y < s.width; ++y)
          s.values[static_cast<std::size_t>(z) * static_cast<std::size_t>(s.width) +
                   static_cast<std::size_t>(y)] = vol.at(index, y, z, 0);
  }
  return s;
}

}  // namespace detail

// 8-bit P5 slice render: min-max scaled background, map burned in on its
// nonzero voxels with a ramp from mid-gray to white driven by |value| over
// the whole map's maximum. Byte output is a pure function of the inputs.
inline void render_slice(const Volume4D& map, const std::optional<Volume4D>& background, int axis,
                         int index, const std::string& out_path) {
  if (background)
    require(map.nx() == background->nx() && map.ny() == background->ny() &&
                map.nz() == background->nz(),
            ErrorKind::ShapeMismatch, "map and background shapes differ");

  const detail::Slice map_slice = detail::extract_slice(map, axis, index);
  std::vector<std::uint8_t> pixels(map_slice.values.size(), 0);

  if (background) {
    const detail::Slice bg = detail::extract_slice(*background, axis, index);
    double lo = bg.values[0], hi = bg.values[0];
    for (double v : bg.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < bg.values.size(); ++i)
      pixels[i] = span > 0.0
                      ? static_cast<std::uint8_t>(std::lround(255.0 * (bg.values[i] - lo) / span))
                      : 0;
  }

  double map_max = 0.0;
  for (double v : map.data()) map_max = std::max(map_max, std::abs(v));
  if (map_max > 0.0) {
    for (std::size_t i = 0; i < map_slice.values.size(); ++i) {
      const double v = map_slice.values[i];
      if (v == 0.0) continue;
      const double t = std::abs(v) / map_max;
      pixels[i] = static_cast<std::uint8_t>(64 + std::lround(191.0 * t));
    }
  }
  write_pgm(out_path, map_slice.width, map_slice.height, pixels);
}

}  // namespace voxkit
