#include "bevcv/manifest.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "bevcv/error.hpp"

namespace bevcv {

namespace {

using nlohmann::json;

ManifestEntry parse_line(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
  }
  if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "pov" && key != "aerial" && key != "yaw_deg" &&
        key != "lat" && key != "lon") {
      throw ParseError("unknown field '" + key + "'", lineno);
    }
  }
  const auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) {
      throw ParseError(std::string("missing field '") + key + "'", lineno);
    }
    return j.at(key);
  };
  const auto number = [&](const json& v, const char* key) {
    if (!v.is_number()) {
      throw ParseError(std::string("'") + key + "' must be a number", lineno);
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      throw ParseError(std::string("'") + key + "' must be finite", lineno);
    }
    return d;
  };

  ManifestEntry e;
  const json& id = require("id");
  if (!id.is_number_unsigned()) {
    throw ParseError("'id' must be a non-negative integer", lineno);
  }
  e.id = id.get<std::uint64_t>();
  const json& pov = require("pov");
  const json& aer = require("aerial");
  if (!pov.is_string() || !aer.is_string()) {
    throw ParseError("'pov' and 'aerial' must be strings", lineno);
  }
  e.pov_path = pov.get<std::string>();
  e.aerial_path = aer.get<std::string>();
  e.yaw_deg = number(require("yaw_deg"), "yaw_deg");
  if (e.yaw_deg < 0.0 || e.yaw_deg >= 360.0) {
    throw ParseError("yaw_deg " + std::to_string(e.yaw_deg) +
                         " outside [0, 360)",
                     lineno);
  }
  if (j.contains("lat")) {
    e.lat = number(j["lat"], "lat");
    if (*e.lat < -90.0 || *e.lat > 90.0) {
      throw ParseError("lat outside [-90, 90]", lineno);
    }
  }
  if (j.contains("lon")) {
    e.lon = number(j["lon"], "lon");
    if (*e.lon < -180.0 || *e.lon > 180.0) {
      throw ParseError("lon outside [-180, 180]", lineno);
    }
  }
  return e;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest_text(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::unordered_set<std::uint64_t> seen;
  std::size_t lineno = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ManifestEntry e = parse_line(line, lineno);
    if (!seen.insert(e.id).second) {
      throw DuplicateId("id " + std::to_string(e.id) + " repeated on line " +
                        std::to_string(lineno));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest_text(ss.str());
}

std::string manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["pov"] = e.pov_path;
  j["aerial"] = e.aerial_path;
  j["yaw_deg"] = e.yaw_deg;
  if (e.lat) j["lat"] = *e.lat;
  if (e.lon) j["lon"] = *e.lon;
  return j.dump();
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& e : entries) out << manifest_line(e) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::filesystem::path resolve_manifest_path(const std::filesystem::path& manifest,
                                            const std::string& entry_path) {
  const std::filesystem::path p(entry_path);
  if (p.is_absolute()) return p;
  return manifest.parent_path() / p;
}

}  // namespace bevcv
