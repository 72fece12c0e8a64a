#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skelact/clip.hpp"

namespace skelact {

enum class ClipFormat { kJson, kNtu };

/// Picks the format from the file extension: .json / .skeleton.
ClipFormat detect_clip_format(const std::string& path);

/// Reads one clip. JSON carries its own topology; NTU text files use the
/// 25-joint humanoid. Malformed input throws std::runtime_error whose message
/// includes the path and (for the text format) the line number.
SkeletonClip parse_clip_file(const std::string& path, ClipFormat format);

/// Writes the canonical JSON clip format. Numbers survive a parse round-trip
/// bit-exactly.
void write_clip_file(const std::string& path, const SkeletonClip& clip);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  std::optional<int> label;
  std::string split;  // "train" | "val"
};

std::vector<ManifestEntry> read_manifest(const std::string& dir);
void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries);

/// One clip file per sample plus manifest.csv. Existing files are replaced.
void save_dataset(const std::string& dir, const Dataset& train, const Dataset& val);

/// Loads the (train, val) splits listed in dir/manifest.csv.
std::pair<Dataset, Dataset> load_dataset(const std::string& dir);

}  // namespace skelact
