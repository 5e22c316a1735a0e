#include "mirror/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace mirror {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

enum : int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUInt16 = 512,
  kUInt32 = 768,
};

struct GzCloser {
  void operator()(gzFile f) const {
    if (f) gzclose(f);
  }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

template <class T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <class T>
void byteswap_inplace(T& v) {
  v = byteswap_value(v);
}

void swap_header(Nifti1Header& h) {
  byteswap_inplace(h.sizeof_hdr);
  for (auto& d : h.dim) byteswap_inplace(d);
  byteswap_inplace(h.datatype);
  byteswap_inplace(h.bitpix);
  for (auto& p : h.pixdim) byteswap_inplace(p);
  byteswap_inplace(h.vox_offset);
  byteswap_inplace(h.scl_slope);
  byteswap_inplace(h.scl_inter);
  byteswap_inplace(h.qform_code);
  byteswap_inplace(h.sform_code);
  byteswap_inplace(h.qoffset_x);
  byteswap_inplace(h.qoffset_y);
  byteswap_inplace(h.qoffset_z);
  for (auto& r : h.srow_x) byteswap_inplace(r);
  for (auto& r : h.srow_y) byteswap_inplace(r);
  for (auto& r : h.srow_z) byteswap_inplace(r);
}

int bytes_per_voxel(int16_t datatype) {
  switch (datatype) {
    case kUInt8:
    case kInt8: return 1;
    case kInt16:
    case kUInt16: return 2;
    case kInt32:
    case kUInt32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

template <class T>
void decode(const std::vector<unsigned char>& raw, bool swap, std::vector<float>& out) {
  const size_t n = out.size();
  for (size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    if (swap) v = byteswap_value(v);
    out[i] = static_cast<float>(v);
  }
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("malformed header in " + path.string() + ": " + why);
}

bool wants_gzip(const std::filesystem::path& path) { return path.extension() == ".gz"; }

void write_file(const Nifti1Header& hdr, const void* data, size_t bytes,
                const std::filesystem::path& path) {
  const char* mode = wants_gzip(path) ? "wb6" : "wbT";
  GzHandle f(gzopen(path.string().c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const char extension[4] = {0, 0, 0, 0};
  bool ok = gzwrite(f.get(), &hdr, sizeof(hdr)) == static_cast<int>(sizeof(hdr));
  ok = ok && gzwrite(f.get(), extension, 4) == 4;
  const auto* p = static_cast<const unsigned char*>(data);
  while (ok && bytes > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<size_t>(bytes, 1u << 30));
    ok = gzwrite(f.get(), p, chunk) == static_cast<int>(chunk);
    p += chunk;
    bytes -= chunk;
  }
  if (!ok) throw std::runtime_error("write failed for " + path.string());
  if (gzclose(f.release()) != Z_OK) throw std::runtime_error("write failed for " + path.string());
}

Nifti1Header make_header(const Volume& v, int16_t datatype) {
  static_assert(std::endian::native == std::endian::little, "writer emits native little-endian");
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int a = 0; a < 3; ++a) h.dim[a + 1] = static_cast<int16_t>(v.shape()[a]);
  for (int a = 4; a < 8; ++a) h.dim[a] = 1;
  h.datatype = datatype;
  h.bitpix = static_cast<int16_t>(8 * bytes_per_voxel(datatype));
  h.pixdim[0] = 1.0f;
  for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(v.spacing()[a]);
  for (int a = 4; a < 8; ++a) h.pixdim[a] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // mm
  h.qform_code = 1;
  h.sform_code = 1;
  h.qoffset_x = static_cast<float>(v.origin()[0]);
  h.qoffset_y = static_cast<float>(v.origin()[1]);
  h.qoffset_z = static_cast<float>(v.origin()[2]);
  h.srow_x[0] = h.pixdim[1];
  h.srow_y[1] = h.pixdim[2];
  h.srow_z[2] = h.pixdim[3];
  h.srow_x[3] = h.qoffset_x;
  h.srow_y[3] = h.qoffset_y;
  h.srow_z[3] = h.qoffset_z;
  std::memcpy(h.magic, "n+1\0", 4);
  for (auto dim : v.shape()) {
    if (dim > INT16_MAX) throw std::invalid_argument("volume too large for NIfTI-1: " + to_string(v.shape()));
  }
  return h;
}

}  // namespace

Volume load_volume(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.string().c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open " + path.string());

  Nifti1Header h{};
  if (gzread(f.get(), &h, sizeof(h)) != static_cast<int>(sizeof(h))) malformed(path, "truncated header");
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    if (byteswap_value(h.sizeof_hdr) != 348) malformed(path, "sizeof_hdr is not 348");
    swap = true;
    swap_header(h);
  }
  if (std::memcmp(h.magic, "n+1", 3) != 0 && std::memcmp(h.magic, "ni1", 3) != 0) {
    malformed(path, "bad magic");
  }
  if (h.dim[0] < 1 || h.dim[0] > 7) malformed(path, "dim[0] out of range");
  for (int a = 1; a <= h.dim[0]; ++a) {
    if (h.dim[a] < 1) malformed(path, "non-positive dimension");
  }
  for (int a = 4; a <= h.dim[0]; ++a) {
    if (h.dim[a] > 1) throw std::runtime_error("non-3D payload in " + path.string());
  }
  const int bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0) malformed(path, "unsupported datatype " + std::to_string(h.datatype));

  Shape3 shape{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  for (int a = 0; a < std::min<int>(3, h.dim[0]); ++a) {
    shape[a] = h.dim[a + 1];
    const double s = std::fabs(static_cast<double>(h.pixdim[a + 1]));
    spacing[a] = s > 0.0 ? s : 1.0;
  }
  Vec3 origin{h.qoffset_x, h.qoffset_y, h.qoffset_z};
  if (h.sform_code > 0) origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};

  const auto offset = static_cast<long>(h.vox_offset);
  if (offset < 348) malformed(path, "vox_offset before end of header");
  if (gzseek(f.get(), offset, SEEK_SET) != offset) malformed(path, "vox_offset beyond end of file");

  const size_t n = static_cast<size_t>(voxel_count(shape));
  std::vector<unsigned char> raw(n * static_cast<size_t>(bpv));
  size_t got = 0;
  while (got < raw.size()) {
    const unsigned chunk = static_cast<unsigned>(std::min<size_t>(raw.size() - got, 1u << 30));
    const int r = gzread(f.get(), raw.data() + got, chunk);
    if (r <= 0) throw std::runtime_error("truncated voxel data in " + path.string());
    got += static_cast<size_t>(r);
  }

  std::vector<float> values(n);
  switch (h.datatype) {
    case kUInt8: decode<uint8_t>(raw, swap, values); break;
    case kInt8: decode<int8_t>(raw, swap, values); break;
    case kInt16: decode<int16_t>(raw, swap, values); break;
    case kUInt16: decode<uint16_t>(raw, swap, values); break;
    case kInt32: decode<int32_t>(raw, swap, values); break;
    case kUInt32: decode<uint32_t>(raw, swap, values); break;
    case kFloat32: decode<float>(raw, swap, values); break;
    case kFloat64: decode<double>(raw, swap, values); break;
    default: break;
  }
  if (h.scl_slope != 0.0f && std::isfinite(h.scl_slope) &&
      (h.scl_slope != 1.0f || h.scl_inter != 0.0f)) {
    for (auto& v : values) v = v * h.scl_slope + h.scl_inter;
  }
  return Volume(shape, std::move(values), spacing, origin);
}

void save_volume(const Volume& volume, const std::filesystem::path& path) {
  const auto hdr = make_header(volume, kFloat32);
  write_file(hdr, volume.values().data(), volume.values().size_bytes(), path);
}

void save_mask(const Volume& mask, const std::filesystem::path& path) {
  float lo = 0.0f, hi = 0.0f;
  for (float v : mask.values()) {
    if (v != std::nearbyint(v)) throw std::invalid_argument("mask must be integer-valued");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo >= 0.0f && hi <= 255.0f) {
    std::vector<uint8_t> data(mask.values().begin(), mask.values().end());
    write_file(make_header(mask, kUInt8), data.data(), data.size(), path);
  } else if (lo >= INT16_MIN && hi <= INT16_MAX) {
    std::vector<int16_t> data(mask.values().begin(), mask.values().end());
    write_file(make_header(mask, kInt16), data.data(), data.size() * sizeof(int16_t), path);
  } else {
    throw std::invalid_argument("mask labels exceed the int16 range");
  }
}

}  // namespace mirror
