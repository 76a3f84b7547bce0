#include "i2i/core/archive.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'I', '2', 'I', 'A', 'R', 'C', 'H', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated archive " + path.string());
  return v;
}

std::string get_bytes(std::istream& is, std::uint64_t n, const std::filesystem::path& path) {
  if (n > (std::uint64_t{1} << 32)) throw IoError("implausible field length in archive " + path.string());
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("truncated archive " + path.string());
  return s;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kVersion);
    const std::string meta = archive.metadata.dump();
    put<std::uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<std::uint64_t>(os, archive.arrays.size());
    for (const auto& [name, p] : archive.arrays) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(os, p.trainable ? 1 : 0);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
      for (auto d : p.value.shape()) put<std::uint64_t>(os, d);
      os.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!os) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open archive " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not an archive: " + path.string());
  if (auto v = get<std::uint32_t>(is, path); v != kVersion) {
    throw IoError("unsupported archive version " + std::to_string(v) + " in " + path.string());
  }
  Archive archive;
  const auto meta_len = get<std::uint64_t>(is, path);
  try {
    archive.metadata = nlohmann::json::parse(get_bytes(is, meta_len, path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad archive metadata in " + path.string() + ": " + e.what());
  }
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_bytes(is, get<std::uint32_t>(is, path), path);
    const bool trainable = (get<std::uint8_t>(is, path) & 1u) != 0;
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw IoError("implausible rank for '" + name + "' in " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(is, path);
    Tensor t(shape);
    if (t.size() && !is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw IoError("truncated array '" + name + "' in " + path.string());
    }
    archive.arrays.add(std::move(name), std::move(t), trainable);
  }
  return archive;
}

void store_parameters(Archive& archive, const ParameterSet& params, std::string_view prefix) {
  for (const auto& [name, p] : params) archive.arrays.add(std::string(prefix) + name, p.value, p.trainable);
}

ParameterSet load_parameters(const Archive& archive, std::string_view prefix) {
  ParameterSet out;
  for (const auto& [name, p] : archive.arrays) {
    if (name.starts_with(prefix)) out.add(name.substr(prefix.size()), p.value, p.trainable);
  }
  return out;
}

}  // namespace i2i
