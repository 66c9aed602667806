#include "output.hpp"

#include "gq/error.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gq::cli {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw FormatError("cli.manifest", "SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string format_number(double v) {
    if (v == 0.0) v = 0.0;  // drop the sign of zero
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

OutputSink::OutputSink(std::string directory) : directory_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) throw FormatError("cli.output", "cannot create output directory '" + directory_ + "': " + ec.message());
    std::ifstream in(std::filesystem::path(directory_) / "manifest.json");
    if (in) {
        try {
            in >> manifest_;
        } catch (const nlohmann::json::exception&) {
            manifest_ = nlohmann::json::object();
        }
    }
    if (!manifest_.is_object()) manifest_ = nlohmann::json::object();
    manifest_["schema_version"] = kSchemaVersion;
    if (!manifest_.contains("files")) manifest_["files"] = nlohmann::json::object();
}

void OutputSink::write_file(const std::string& name, const std::string& content) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto path = std::filesystem::path(directory_) / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw FormatError("cli.output", "cannot write '" + path.string() + "'");
    manifest_["files"][name] = sha256_hex(content);
}

void OutputSink::write_csv(const std::string& name, const std::vector<std::string>& columns,
                           const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    write_file(name, os.str());
}

void OutputSink::write_json(const std::string& name, nlohmann::json value) {
    if (value.is_object()) value["schema_version"] = kSchemaVersion;
    write_file(name, value.dump(2) + "\n");
}

void OutputSink::set(const std::string& key, const nlohmann::json& value) {
    std::lock_guard<std::mutex> lock(mutex_);
    manifest_[key] = value;
}

void OutputSink::commit(const std::string& command) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& commands = manifest_["commands"];
    if (!commands.is_array()) commands = nlohmann::json::array();
    if (std::find(commands.begin(), commands.end(), command) == commands.end()) commands.push_back(command);
    std::ofstream out(std::filesystem::path(directory_) / "manifest.json", std::ios::binary);
    out << manifest_.dump(2) << "\n";
    if (!out) throw FormatError("cli.output", "cannot write manifest.json");
}

}  // namespace gq::cli
