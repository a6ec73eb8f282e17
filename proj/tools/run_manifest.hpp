#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace qgcl::cli {

// Record of one invocation, written next to its outputs. `argv` is enough
// to replay the run.
struct RunManifest {
    std::string subcommand;
    std::vector<std::string> argv;
    std::string working_directory;  // relative paths in argv resolve here
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string tool_version;
    std::chrono::system_clock::time_point started;
    std::chrono::system_clock::time_point finished;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
};

// `<out>.manifest.json` for a file output, `<out>/manifest.json` for a
// directory.
std::filesystem::path manifest_path(const std::filesystem::path& out);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace qgcl::cli
