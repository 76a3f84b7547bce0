#include "i2i/reporting/manifest.hpp"

#include <ctime>
#include <fstream>
#include <vector>

#include "i2i/core/errors.hpp"
#include "i2i/core/hash.hpp"

namespace i2i {

std::string manifest_hash(const RunManifest& m) {
  Fnv1a h;
  for (const std::string& field : {m.command, format_config(m.config), m.dataset_hash, std::to_string(m.seed),
                                   m.toolkit_version, m.inputs.dump()}) {
    h.update(field);
    h.update(std::string_view("\n", 1));
  }
  return h.hex();
}

std::filesystem::path run_directory(const std::filesystem::path& out_dir, const RunManifest& manifest) {
  return out_dir / (manifest.command + "-" + manifest_hash(manifest).substr(0, 12));
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config", to_json(m.config)},
          {"dataset_hash", m.dataset_hash},
          {"seed", m.seed},
          {"toolkit_version", m.toolkit_version},
          {"inputs", m.inputs},
          {"manifest_hash", manifest_hash(m)},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(manifest).dump(2) << '\n';
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.hex();
}

}  // namespace i2i
