#ifndef LGCP_IO_MANIFEST_HPP
#define LGCP_IO_MANIFEST_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "lgcp/error.hpp"
#include "lgcp/io/csv.hpp"

namespace lgcp::io {

inline constexpr const char* kVersion = "1.0.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

/// Write via a temporary file and rename, so readers never see a partial
/// file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw InvalidInput("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Collects what a run read and wrote; saved last.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed, std::string config_snapshot)
      : command_(std::move(command)), seed_(seed), config_(std::move(config_snapshot)),
        start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) { inputs_.emplace_back(path, sha256_file(path)); }

  /// Write an output file and record its checksum.
  void output(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
    write_atomic(dir / name, content);
    outputs_.emplace_back(name, sha256_hex(content));
  }

  void timing(const std::string& phase, double seconds) { timings_[phase] = seconds; }
  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["software"] = "lgcp";
    j["version"] = kVersion;
    j["command"] = command_;
    j["seed"] = seed_;
    j["config"] = config_;
    for (const auto& [p, h] : inputs_) j["inputs"].push_back({{"path", p}, {"sha256", h}});
    for (const auto& [p, h] : outputs_) j["outputs"].push_back({{"path", p}, {"sha256", h}});
    nlohmann::json t = timings_;
    t["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j["timings"] = t;
    if (!extra_.empty()) j["notes"] = extra_;
    return j;
  }

  void save(const std::filesystem::path& dir, const std::string& name = "manifest.json") const {
    write_atomic(dir / name, to_json().dump(2) + "\n");
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string config_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
  std::map<std::string, double> timings_;
  nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace lgcp::io

#endif  // LGCP_IO_MANIFEST_HPP
