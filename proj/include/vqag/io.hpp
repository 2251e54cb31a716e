#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "vqag/errors.hpp"

namespace vqag {

/// Writes `text` to a sibling temporary file and renames it over `target`.
inline void write_file_atomic(const std::filesystem::path& target, const std::string& text) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + target.string());
    out << text;
    if (!out) throw InputError("write failed for " + target.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace vqag
