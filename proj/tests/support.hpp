#pragma once

#include <fstream>
#include <sstream>
#include <string>

namespace detkit::test {

inline std::string data_path(const std::string& name) {
  return std::string(DETKIT_TEST_DATA_DIR) + "/" + name;
}

inline std::string config_path(const std::string& name) {
  return std::string(DETKIT_DATA_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detkit::test
