#pragma once

#include "mfd/numcore/tensor.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace mfd {

/// Free-form key/value metadata stored in a checkpoint header. Values must
/// not contain newlines.
using CheckpointMeta = std::map<std::string, std::string>;

/// Checkpoint layout: a text header
///
///     MFD1
///     meta <key> <value>
///     param <name> <rows> <cols> <f32|f64> <byte offset>
///     end
///
/// followed by the raw little-endian payload, each parameter at its offset
/// from the first byte after the `end` line.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params, const CheckpointMeta& meta);

/// Loads into precision T regardless of the stored dtype.
template <typename T>
ParamStore<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path);

}  // namespace mfd
