#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>

#include "fpp/core/error.hpp"

namespace fpp {

/// Runs writer(tmp_path) against a sibling temporary file, then renames it
/// over `destination`. Readers never observe a partially written file.
template <typename Writer>
void write_atomically(const std::filesystem::path& destination, Writer&& writer) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned long> counter{0};
  if (destination.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(destination.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + destination.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = destination;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
  try {
    writer(tmp);
  } catch (...) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, destination, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + destination.string());
  }
}

inline void write_text_file(const std::filesystem::path& destination, std::string_view text) {
  write_atomically(destination, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + destination.string());
  });
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace fpp
