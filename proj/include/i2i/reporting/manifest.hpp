#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "i2i/core/config.hpp"

namespace i2i {

inline constexpr const char* kToolkitVersion = "1.0.0";

/// Everything that determines a run's outputs, plus timestamps.
struct RunManifest {
  std::string command;
  ExperimentConfig config;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string toolkit_version = kToolkitVersion;
  /// Extra inputs that change outputs (task, checkpoint hash, ...).
  nlohmann::json inputs = nlohmann::json::object();
  std::string started_at;
  std::string finished_at;
};

/// FNV-1a over every field except the timestamps, as 16 hex digits.
std::string manifest_hash(const RunManifest& manifest);

/// <out_dir>/<command>-<first 12 hex digits of the hash>.
std::filesystem::path run_directory(const std::filesystem::path& out_dir, const RunManifest& manifest);

nlohmann::json to_json(const RunManifest& manifest);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace i2i
