#include "manifest.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "detkit/error.hpp"

namespace detkit::cli {

std::string tool_version() { return DETKIT_VERSION; }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw InvariantViolation("sha256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = "detkit";
  j["version"] = tool_version();
  j["subcommand"] = subcommand;
  j["config"] = config;
  j["inputs"] = input_digests;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  return j;
}

}  // namespace detkit::cli
