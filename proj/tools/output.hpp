#pragma once

// Artifact writer: versioned CSV and JSON files plus a manifest of SHA-256 hashes.

#include <json.hpp>

#include <mutex>
#include <string>
#include <vector>

namespace gq::cli {

inline constexpr int kSchemaVersion = 1;

std::string sha256_hex(const std::string& bytes);

/// Shortest round-trip decimal form, so identical runs give identical bytes.
std::string format_number(double v);

class OutputSink {
public:
    /// Creates the directory and loads an existing manifest.json, if any.
    explicit OutputSink(std::string directory);

    const std::string& directory() const { return directory_; }

    void write_csv(const std::string& name, const std::vector<std::string>& columns,
                   const std::vector<std::vector<std::string>>& rows);
    /// Adds "schema_version" to objects.
    void write_json(const std::string& name, nlohmann::json value);

    /// Extra manifest fields such as the calibrated kappa.
    void set(const std::string& key, const nlohmann::json& value);
    const nlohmann::json& manifest() const { return manifest_; }

    /// Rewrites manifest.json.
    void commit(const std::string& command);

private:
    void write_file(const std::string& name, const std::string& content);

    std::string directory_;
    nlohmann::json manifest_;
    std::mutex mutex_;
};

}  // namespace gq::cli
