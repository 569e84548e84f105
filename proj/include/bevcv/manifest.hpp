#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bevcv {

struct ManifestEntry {
  std::uint64_t id = 0;
  std::string pov_path;
  std::string aerial_path;
  double yaw_deg = 0.0;  // [0, 360)
  std::optional<double> lat;
  std::optional<double> lon;

  bool operator==(const ManifestEntry&) const = default;
};

// JSON Lines, one object per line:
//   {"id": 7, "pov": "p/7.png", "aerial": "a/7.png", "yaw_deg": 12.5,
//    "lat": 40.1, "lon": -75.2}
// Blank lines are skipped. Throws ParseError (with the 1-based line) for
// malformed lines or out-of-range values, DuplicateId for repeated ids.
std::vector<ManifestEntry> parse_manifest_text(std::string_view text);
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path);

std::string manifest_line(const ManifestEntry& e);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

// Relative paths in a manifest are resolved against its directory.
std::filesystem::path resolve_manifest_path(const std::filesystem::path& manifest,
                                            const std::string& entry_path);

}  // namespace bevcv
