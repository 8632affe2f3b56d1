#pragma once

// Run manifests: every file a subcommand produced, with its SHA-256.

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace bia::tools {

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct OutputEntry {
  std::filesystem::path path;
  std::string sha256;
};

class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config)
      : command_(std::move(command)), config_(std::move(config)) {}

  /// Writes `bytes` to `path` and records its hash.
  void write(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << bytes;
    out.close();
    if (!out) throw std::runtime_error("write failed for " + path.string());
    outputs_.push_back({path, sha256_hex(bytes)});
  }

  /// True when every listed file still exists with the recorded hash.
  bool validate() const {
    for (const auto& entry : outputs_) {
      if (!std::filesystem::exists(entry.path)) return false;
      if (sha256_hex(read_file(entry.path)) != entry.sha256) return false;
    }
    return true;
  }

  nlohmann::json to_json(const std::string& version, double seconds) const {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& e : outputs_) outputs.push_back({{"path", e.path.string()}, {"sha256", e.sha256}});
    return {{"command", command_},
            {"config", config_},
            {"outputs", outputs},
            {"tool_version", version},
            {"duration_seconds", seconds}};
  }

 private:
  std::string command_;
  nlohmann::json config_;
  std::vector<OutputEntry> outputs_;
};

}  // namespace bia::tools
