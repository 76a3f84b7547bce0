#include "i2i/data/nifti.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include <zlib.h>

#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

// NIfTI-1 datatype codes.
enum : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

template <typename T>
T read_field(const std::uint8_t* hdr, std::size_t offset, bool swap) {
  T v;
  std::memcpy(&v, hdr + offset, sizeof(T));
  if (swap) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void write_field(std::uint8_t* hdr, std::size_t offset, T v) {
  std::memcpy(hdr + offset, &v, sizeof(T));
}

class GzFile {
 public:
  GzFile(const std::filesystem::path& path, const char* mode) : f_(gzopen(path.string().c_str(), mode)) {}
  ~GzFile() {
    if (f_) gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
  explicit operator bool() const { return f_ != nullptr; }

  bool read(void* dst, std::size_t n) {
    auto* p = static_cast<char*>(dst);
    while (n > 0) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(f_, p, chunk);
      if (got <= 0) return false;
      p += got;
      n -= static_cast<std::size_t>(got);
    }
    return true;
  }
  bool write(const void* src, std::size_t n) {
    const auto* p = static_cast<const char*>(src);
    while (n > 0) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int put = gzwrite(f_, p, chunk);
      if (put <= 0) return false;
      p += put;
      n -= static_cast<std::size_t>(put);
    }
    return true;
  }
  bool skip(std::size_t n) { return gzseek(f_, static_cast<z_off_t>(n), SEEK_CUR) >= 0; }
  bool close() {
    const int rc = gzclose(f_);
    f_ = nullptr;
    return rc == Z_OK;
  }

 private:
  gzFile f_;
};

template <typename T>
void convert(const std::vector<std::uint8_t>& raw, bool swap, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    if (swap && sizeof(T) > 1) {
      auto* b = reinterpret_cast<std::uint8_t*>(&v);
      std::reverse(b, b + sizeof(T));
    }
    out[i] = static_cast<double>(v);
  }
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path, std::string subject_id, Modality modality) {
  GzFile f(path, "rb");
  if (!f) throw IoError("cannot open NIfTI file " + path.string());
  std::array<std::uint8_t, kHeaderSize> hdr{};
  if (!f.read(hdr.data(), hdr.size())) throw IoError("truncated NIfTI header in " + path.string());

  bool swap = false;
  if (read_field<std::int32_t>(hdr.data(), 0, false) != kHeaderSize) {
    if (read_field<std::int32_t>(hdr.data(), 0, true) != kHeaderSize) {
      throw IoError(path.string() + " is not a NIfTI-1 file (sizeof_hdr != 348)");
    }
    swap = true;
  }
  if (std::memcmp(hdr.data() + 344, "n+1", 3) != 0 && std::memcmp(hdr.data() + 344, "ni1", 3) != 0) {
    throw IoError(path.string() + " lacks the NIfTI-1 magic string");
  }
  if (std::memcmp(hdr.data() + 344, "ni1", 3) == 0) {
    throw IoError(path.string() + " is a two-file (.hdr/.img) NIfTI; only single-file .nii is supported");
  }

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) dim[i] = read_field<std::int16_t>(hdr.data(), 40 + 2 * i, swap);
  if (dim[0] < 3) throw IoError(path.string() + " is not a 3D volume");
  for (int i = 4; i <= dim[0] && i < 8; ++i) {
    if (dim[i] > 1) throw IoError(path.string() + " has more than one volume (dim[" + std::to_string(i) + "] > 1)");
  }
  const auto datatype = read_field<std::int16_t>(hdr.data(), 70, swap);
  const std::size_t bpv = bytes_per_voxel(datatype);
  if (bpv == 0) throw IoError(path.string() + " uses unsupported NIfTI datatype " + std::to_string(datatype));
  const auto vox_offset = static_cast<std::size_t>(read_field<float>(hdr.data(), 108, swap));
  float slope = read_field<float>(hdr.data(), 112, swap);
  const float inter = read_field<float>(hdr.data(), 116, swap);
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

  Volume v;
  v.subject_id = std::move(subject_id);
  v.modality = modality;
  for (std::size_t i = 0; i < 3; ++i) {
    if (dim[i + 1] <= 0) throw IoError(path.string() + " has a non-positive dimension");
    v.dims[i] = static_cast<std::size_t>(dim[i + 1]);
    const float pix = read_field<float>(hdr.data(), 80 + 4 * i, swap);
    v.spacing[i] = pix > 0.0f ? static_cast<double>(pix) : 1.0;
  }
  const std::size_t n = v.dims[0] * v.dims[1] * v.dims[2];
  if (vox_offset > kHeaderSize && !f.skip(vox_offset - kHeaderSize)) {
    throw IoError("cannot seek to voxel data in " + path.string());
  }
  std::vector<std::uint8_t> raw(n * bpv);
  if (!f.read(raw.data(), raw.size())) throw IoError("truncated voxel data in " + path.string());

  v.voxels.resize(n);
  switch (datatype) {
    case kUint8: convert<std::uint8_t>(raw, swap, v.voxels); break;
    case kInt8: convert<std::int8_t>(raw, swap, v.voxels); break;
    case kInt16: convert<std::int16_t>(raw, swap, v.voxels); break;
    case kUint16: convert<std::uint16_t>(raw, swap, v.voxels); break;
    case kInt32: convert<std::int32_t>(raw, swap, v.voxels); break;
    case kUint32: convert<std::uint32_t>(raw, swap, v.voxels); break;
    case kFloat32: convert<float>(raw, swap, v.voxels); break;
    case kFloat64: convert<double>(raw, swap, v.voxels); break;
  }
  for (auto& x : v.voxels) x = x * static_cast<double>(slope) + static_cast<double>(inter);
  return v;
}

void write_nifti(const std::filesystem::path& path, const Volume& volume) {
  validate_volume(volume);
  std::array<std::uint8_t, kVoxOffset> hdr{};
  write_field<std::int32_t>(hdr.data(), 0, kHeaderSize);
  const std::array<std::int16_t, 8> dim = {3,
                                           static_cast<std::int16_t>(volume.dims[0]),
                                           static_cast<std::int16_t>(volume.dims[1]),
                                           static_cast<std::int16_t>(volume.dims[2]),
                                           1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) write_field<std::int16_t>(hdr.data(), 40 + 2 * i, dim[i]);
  write_field<std::int16_t>(hdr.data(), 70, kFloat32);
  write_field<std::int16_t>(hdr.data(), 72, 32);
  write_field<float>(hdr.data(), 76, 1.0f);
  for (std::size_t i = 0; i < 3; ++i) write_field<float>(hdr.data(), 80 + 4 * i, static_cast<float>(volume.spacing[i]));
  write_field<float>(hdr.data(), 108, static_cast<float>(kVoxOffset));
  write_field<float>(hdr.data(), 112, 1.0f);
  write_field<float>(hdr.data(), 116, 0.0f);
  hdr[123] = 2;  // xyzt_units: millimetres
  std::memcpy(hdr.data() + 344, "n+1", 4);

  std::vector<float> data(volume.voxels.size());
  std::transform(volume.voxels.begin(), volume.voxels.end(), data.begin(),
                 [](double x) { return static_cast<float>(x); });

  const bool gz = path.extension() == ".gz";
  GzFile f(path, gz ? "wb6" : "wbT");
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  if (!f.write(hdr.data(), hdr.size()) || !f.write(data.data(), data.size() * sizeof(float)) || !f.close()) {
    throw IoError("failed writing NIfTI file " + path.string());
  }
}

}  // namespace i2i
