#include "run_manifest.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "qgcl/error.hpp"

namespace qgcl::cli {

namespace {

std::string iso_utc(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream o;
    o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return o.str();
}

std::chrono::system_clock::time_point parse_iso_utc(const std::string& s) {
    std::tm tm{};
    std::istringstream in(s);
    in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    if (in.fail()) throw FormatError("manifest: bad timestamp '" + s + "'");
    return std::chrono::system_clock::from_time_t(timegm(&tm));
}

}  // namespace

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    j["working_directory"] = working_directory;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["threads"] = threads;
    j["tool_version"] = tool_version;
    j["started"] = iso_utc(started);
    j["finished"] = iso_utc(finished);
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        RunManifest m;
        m.subcommand = j.at("subcommand").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.working_directory = j.at("working_directory").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.threads = j.at("threads").get<unsigned>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.started = parse_iso_utc(j.at("started").get<std::string>());
        m.finished = parse_iso_utc(j.at("finished").get<std::string>());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& out) {
    if (std::filesystem::is_directory(out)) return out / "manifest.json";
    auto p = out;
    p += ".manifest.json";
    return p;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << m.to_json();
        if (!out) throw FormatError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    return RunManifest::from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace qgcl::cli
