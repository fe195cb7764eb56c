#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacph/harness/config.hpp"
#include "dacph/pendulum/pendulum.hpp"

namespace dacph::harness {

inline constexpr int kManifestFormat = 1;
inline constexpr const char* kCsvHeader = "t,x1,x2,z1,z2,Pic1,Pic2,Pi1,Pi2,tau,H,reward";

// Shortest round-trip decimal form; identical inputs give identical bytes.
std::string format_double(double v);

std::string episode_csv(const pendulum::EpisodeLog& log);
void write_text(const std::filesystem::path& path, const std::string& text);

// Generic numeric table: one header line, then one row per index.
std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns);

// Run manifest: format version, tool version, seed, config hash, command,
// the effective configuration, defaults that were applied and output files.
nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command,
                             const std::vector<std::string>& outputs);
void write_manifest(const std::filesystem::path& path, const nlohmann::json& manifest);
RunConfig load_manifest(const std::filesystem::path& path);

// Writes plot_runs.py next to the CSV outputs.
void write_plot_script(const std::filesystem::path& dir);

const char* tool_version();

}  // namespace dacph::harness
