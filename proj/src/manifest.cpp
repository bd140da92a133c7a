#include "miemph/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "miemph/errors.hpp"
#include "miemph/rng.hpp"

namespace miemph::manifest {

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = rng::fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

Manifest::Manifest(std::string command) {
  j_["command"] = std::move(command);
  j_["seed"] = 0;
  j_["config"] = nlohmann::ordered_json::object();
  j_["inputs"] = nlohmann::ordered_json::object();
  j_["outputs"] = nlohmann::ordered_json::object();
}

void Manifest::set_seed(std::uint64_t seed) { j_["seed"] = seed; }

void Manifest::add_input(const std::filesystem::path& path) {
  j_["inputs"][path.string()] = file_digest(path);
}

void Manifest::add_output(const std::filesystem::path& path) {
  j_["outputs"][path.string()] = file_digest(path);
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j_.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace miemph::manifest
