#pragma once

// Run manifests: the effective config, the root seed, and FNV-1a digests
// of every input and output artifact. No timestamps or host state, so a
// re-run with the same manifest reproduces every byte.

#include <filesystem>
#include <string>

#include <json.hpp>

namespace miemph::manifest {

// "fnv1a64:<16 hex digits>" over the file bytes.
std::string file_digest(const std::filesystem::path& path);

class Manifest {
 public:
  explicit Manifest(std::string command);

  nlohmann::ordered_json& config() { return j_["config"]; }
  void set_seed(std::uint64_t seed);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::ordered_json j_;
};

}  // namespace miemph::manifest
