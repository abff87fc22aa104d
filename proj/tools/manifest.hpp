#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

namespace detkit::cli {

// Everything needed to reproduce one invocation.
struct RunManifest {
  RunManifest() = default;
  explicit RunManifest(std::string sub) : subcommand(std::move(sub)) {}

  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;  // path -> sha256 hex
  std::optional<uint64_t> seed;

  nlohmann::json to_json() const;
};

std::string tool_version();
std::string sha256_hex(std::string_view bytes);

}  // namespace detkit::cli
