#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "i2i/core/parameter_set.hpp"

namespace i2i {

/// A single-file container of named double arrays plus a JSON metadata record.
///
/// Layout (all integers little-endian):
///
///     magic      8 bytes  "I2IARCH\0"
///     version    u32      1
///     meta_len   u64      byte length of the metadata JSON
///     meta       bytes    UTF-8 JSON object
///     count      u64      number of arrays
///     repeated count times, in name order:
///       name_len u32, name bytes
///       flags    u8       bit 0 = trainable
///       rank     u32
///       dims     u64 x rank
///       values   f64 x prod(dims), IEEE-754 binary64
///
/// Values are stored bit-exactly, so a write/read round trip reproduces every
/// parameter including NaN payloads and signed zeros.
struct Archive {
  nlohmann::json metadata = nlohmann::json::object();
  ParameterSet arrays;
};

/// Writes via a temporary sibling file and rename, so an interrupted write never
/// leaves a truncated archive under the final name.
void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws IoError when the file is missing or malformed.
Archive read_archive(const std::filesystem::path& path);

/// Copies every entry of params into the archive under prefix + name.
void store_parameters(Archive& archive, const ParameterSet& params, std::string_view prefix);
/// Extracts entries starting with prefix, stripping the prefix from names.
ParameterSet load_parameters(const Archive& archive, std::string_view prefix);

}  // namespace i2i
