#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "voxkit/volume.hpp"

namespace voxkit {

// NIfTI-1 subset: datatypes u8/i16/i32/f32/f64, single-file "n+1" or
// hdr/img "ni1" pairs, sform or pixdim-diagonal affines. No gzip, no
// extensions, no qform quaternions.
namespace nifti {

// header field offsets (348-byte NIfTI-1 header)
inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kOffSizeofHdr = 0;
inline constexpr std::size_t kOffDim = 40;
inline constexpr std::size_t kOffDatatype = 70;
inline constexpr std::size_t kOffBitpix = 72;
inline constexpr std::size_t kOffPixdim = 76;
inline constexpr std::size_t kOffVoxOffset = 108;
inline constexpr std::size_t kOffSclSlope = 112;
inline constexpr std::size_t kOffSclInter = 116;
inline constexpr std::size_t kOffSformCode = 254;
inline constexpr std::size_t kOffSrowX = 280;
inline constexpr std::size_t kOffSrowY = 296;
inline constexpr std::size_t kOffSrowZ = 312;
inline constexpr std::size_t kOffMagic = 344;

enum Datatype : std::int16_t {
  kU8 = 2,
  kI16 = 4,
  kI32 = 8,
  kF32 = 16,
  kF64 = 64,
};

namespace detail {

inline std::uint16_t load_u16(const unsigned char* p, bool swap) {
  return swap ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
              : static_cast<std::uint16_t>((p[1] << 8) | p[0]);
}
inline std::int16_t load_i16(const unsigned char* p, bool swap) {
  return static_cast<std::int16_t>(load_u16(p, swap));
}
inline std::uint32_t load_u32(const unsigned char* p, bool swap) {
  if (swap)
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  return (std::uint32_t(p[3]) << 24) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[1]) << 8) | std::uint32_t(p[0]);
}
inline std::int32_t load_i32(const unsigned char* p, bool swap) {
  return static_cast<std::int32_t>(load_u32(p, swap));
}
inline std::uint64_t load_u64(const unsigned char* p, bool swap) {
  std::uint64_t hi = load_u32(swap ? p : p + 4, swap);
  std::uint64_t lo = load_u32(swap ? p + 4 : p, swap);
  return (hi << 32) | lo;
}
inline float load_f32(const unsigned char* p, bool swap) {
  return std::bit_cast<float>(load_u32(p, swap));
}
inline double load_f64(const unsigned char* p, bool swap) {
  return std::bit_cast<double>(load_u64(p, swap));
}

inline void store_u16(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>(v >> 8);
}
inline void store_i16(unsigned char* p, std::int16_t v) {
  store_u16(p, static_cast<std::uint16_t>(v));
}
inline void store_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}
inline void store_i32(unsigned char* p, std::int32_t v) {
  store_u32(p, static_cast<std::uint32_t>(v));
}
inline void store_f32(unsigned char* p, float v) { store_u32(p, std::bit_cast<std::uint32_t>(v)); }
inline void store_f64(unsigned char* p, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  store_u32(p, static_cast<std::uint32_t>(bits & 0xffffffffu));
  store_u32(p + 4, static_cast<std::uint32_t>(bits >> 32));
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoFailure, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::IoFailure, "read failed for " + path);
  return bytes;
}

}  // namespace detail

inline Volume4D read(const std::string& path) {
  using namespace detail;
  const std::vector<unsigned char> hdr_bytes = read_file(path);
  require(hdr_bytes.size() >= kHeaderSize, ErrorKind::TruncatedFile,
          path + " is shorter than a NIfTI-1 header");
  const unsigned char* h = hdr_bytes.data();

  // dim[0] in 1..7 decides byte order; sizeof_hdr must then decode to 348
  bool swap = false;
  std::int16_t ndim = load_i16(h + kOffDim, false);
  if (ndim < 1 || ndim > 7) {
    swap = true;
    ndim = load_i16(h + kOffDim, true);
    require(ndim >= 1 && ndim <= 7, ErrorKind::BadMagic, "dim[0] invalid in either byte order");
  }
  require(load_i32(h + kOffSizeofHdr, swap) == 348, ErrorKind::BadMagic,
          "sizeof_hdr is not 348");

  char magic[4];
  std::memcpy(magic, h + kOffMagic, 4);
  const bool single_file = std::memcmp(magic, "n+1\0", 4) == 0;
  const bool pair_file = std::memcmp(magic, "ni1\0", 4) == 0;
  require(single_file || pair_file, ErrorKind::BadMagic, "magic is neither n+1 nor ni1");

  const std::int16_t datatype = load_i16(h + kOffDatatype, swap);
  require(datatype == kU8 || datatype == kI16 || datatype == kI32 || datatype == kF32 ||
              datatype == kF64,
          ErrorKind::UnsupportedDatatype, "datatype " + std::to_string(datatype));

  // dims are read as unsigned 16-bit; real files never carry negatives and
  // this lets sizes up to 65535 round-trip through the int16 field
  std::array<int, 4> shape{1, 1, 1, 1};
  for (int d = 0; d < 4; ++d) {
    if (d < ndim) {
      const int v = load_u16(h + kOffDim + 2 * static_cast<std::size_t>(d + 1), swap);
      require(v >= 1, ErrorKind::BadShape, "dim[" + std::to_string(d + 1) + "] must be positive");
      shape[static_cast<std::size_t>(d)] = v;
    }
  }

  Affine4 affine;
  if (load_i16(h + kOffSformCode, swap) > 0) {
    const std::size_t rows[3] = {kOffSrowX, kOffSrowY, kOffSrowZ};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c)
        affine.m(r, c) = load_f32(h + rows[r] + 4 * static_cast<std::size_t>(c), swap);
  } else {
    for (int d = 0; d < 3; ++d) {
      float pd = load_f32(h + kOffPixdim + 4 * static_cast<std::size_t>(d + 1), swap);
      affine.m(d, d) = pd > 0.0f ? static_cast<double>(pd) : 1.0;
    }
  }

  const float vox_offset = load_f32(h + kOffVoxOffset, swap);
  const float scl_slope = load_f32(h + kOffSclSlope, swap);
  const float scl_inter = load_f32(h + kOffSclInter, swap);

  // locate the payload
  const std::vector<unsigned char>* payload_bytes = &hdr_bytes;
  std::vector<unsigned char> img_bytes;
  std::size_t offset;
  if (single_file) {
    offset = vox_offset >= 0.0f ? static_cast<std::size_t>(vox_offset) : 0;
    require(offset >= kHeaderSize, ErrorKind::BadMagic, "vox_offset points inside the header");
  } else {
    std::filesystem::path img_path(path);
    img_path.replace_extension(".img");
    img_bytes = read_file(img_path.string());
    payload_bytes = &img_bytes;
    offset = vox_offset >= 0.0f ? static_cast<std::size_t>(vox_offset) : 0;
  }

  const std::size_t n_values = static_cast<std::size_t>(shape[0]) *
                               static_cast<std::size_t>(shape[1]) *
                               static_cast<std::size_t>(shape[2]) *
                               static_cast<std::size_t>(shape[3]);
  std::size_t elem_size;
  ElementKind kind;
  switch (datatype) {
    case kU8: elem_size = 1; kind = ElementKind::U8; break;
    case kI16: elem_size = 2; kind = ElementKind::I16; break;
    case kI32: elem_size = 4; kind = ElementKind::I32; break;
    case kF32: elem_size = 4; kind = ElementKind::F32; break;
    default: elem_size = 8; kind = ElementKind::F64; break;
  }
  require(payload_bytes->size() >= offset + n_values * elem_size, ErrorKind::TruncatedFile,
          "payload shorter than dims require");

  const unsigned char* p = payload_bytes->data() + offset;
  std::vector<double> data(n_values);
  for (std::size_t i = 0; i < n_values; ++i, p += elem_size) {
    double v;
    switch (datatype) {
      case kU8: v = static_cast<double>(*p); break;
      case kI16: v = static_cast<double>(load_i16(p, swap)); break;
      case kI32: v = static_cast<double>(load_i32(p, swap)); break;
      case kF32: v = static_cast<double>(load_f32(p, swap)); break;
      default: v = load_f64(p, swap); break;
    }
    if (scl_slope != 0.0f && !(scl_slope == 1.0f && scl_inter == 0.0f))
      v = v * static_cast<double>(scl_slope) + static_cast<double>(scl_inter);
    require(std::isfinite(v), ErrorKind::NonFiniteData,
            "non-finite value at element " + std::to_string(i));
    data[i] = v;
  }
  return Volume4D(shape, affine, std::move(data), kind);
}

// Writes a little-endian single-file NIfTI-1: datatype f64, vox_offset 352,
// sform from the affine. srow entries are stored as float32 per the format,
// so affines round-trip to f32 precision; the payload round-trips bitwise.
inline void write(const Volume4D& vol, const std::string& path) {
  using namespace detail;
  for (int d : vol.shape())
    require(d <= 65535, ErrorKind::IoFailure,
            "dim " + std::to_string(d) + " exceeds the NIfTI-1 16-bit dim field");

  std::vector<unsigned char> h(kHeaderSize + 4, 0);  // header + extension flag
  store_i32(h.data() + kOffSizeofHdr, 348);
  store_i16(h.data() + kOffDim, 4);
  for (int d = 0; d < 4; ++d)
    store_u16(h.data() + kOffDim + 2 * static_cast<std::size_t>(d + 1),
              static_cast<std::uint16_t>(vol.shape()[static_cast<std::size_t>(d)]));
  for (int d = 5; d <= 7; ++d)
    store_u16(h.data() + kOffDim + 2 * static_cast<std::size_t>(d), 1);
  store_i16(h.data() + kOffDatatype, kF64);
  store_i16(h.data() + kOffBitpix, 64);
  store_f32(h.data() + kOffPixdim, 1.0f);
  for (int d = 0; d < 3; ++d) {
    const double sz = vol.affine().linear().col(d).norm();
    store_f32(h.data() + kOffPixdim + 4 * static_cast<std::size_t>(d + 1),
              static_cast<float>(sz));
  }
  store_f32(h.data() + kOffPixdim + 16, 1.0f);
  store_f32(h.data() + kOffVoxOffset, 352.0f);
  store_f32(h.data() + kOffSclSlope, 1.0f);
  store_f32(h.data() + kOffSclInter, 0.0f);
  store_i16(h.data() + kOffSformCode, 1);
  const std::size_t rows[3] = {kOffSrowX, kOffSrowY, kOffSrowZ};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      store_f32(h.data() + rows[r] + 4 * static_cast<std::size_t>(c),
                static_cast<float>(vol.affine().m(r, c)));
  std::memcpy(h.data() + kOffMagic, "n+1\0", 4);

  std::vector<unsigned char> payload(vol.data().size() * 8);
  for (std::size_t i = 0; i < vol.data().size(); ++i)
    store_f64(payload.data() + 8 * i, vol.data()[i]);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoFailure, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  out.flush();
  require(out.good(), ErrorKind::IoFailure, "write failed for " + path);
}

}  // namespace nifti

inline Volume4D read_nifti(const std::string& path) { return nifti::read(path); }
inline void write_nifti(const Volume4D& vol, const std::string& path) { nifti::write(vol, path); }

}  // namespace voxkit
