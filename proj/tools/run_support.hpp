#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hybridrank::cli {

/// Lowercase hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Sidecar describing how an output was produced. Everything except
/// `timestamp` is a function of the command line and input bytes.
class RunManifest {
  public:
    explicit RunManifest(std::string subcommand);

    void set(const std::string& key, nlohmann::ordered_json value) { config_[key] = std::move(value); }
    void add_input(const std::string& role, const std::filesystem::path& path);
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    /// `<output>.manifest.json` next to the first output.
    void write_beside(const std::filesystem::path& output) const;

  private:
    std::string subcommand_;
    nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
    nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
    std::optional<std::uint64_t> seed_;
    std::vector<std::string> outputs_;
};

}  // namespace hybridrank::cli
