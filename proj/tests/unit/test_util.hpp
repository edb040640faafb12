#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "pdex/key_encoding.hpp"
#include "pdex/value.hpp"

namespace pdex::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pdex_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string int_key(std::int64_t v) {
  Value val{v};
  return encode_key(std::span<const Value>(&val, 1));
}

}  // namespace pdex::test
