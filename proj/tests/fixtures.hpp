#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sapnet/bytes.hpp"

namespace fixtures {

inline sapnet::Bytes from_hex(const std::string& hex) {
  sapnet::Bytes out;
  if (hex == "-") {
    return out;
  }
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

// Whitespace-separated fields of every non-comment line.
inline std::vector<std::vector<std::string>> rows(const std::string& name) {
  std::ifstream in(std::string(FIXTURE_DIR) + "/" + name);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream fields(line);
    std::vector<std::string> row;
    for (std::string f; fields >> f;) {
      row.push_back(f);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace fixtures
