// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Scratch directories and a tiny synthetic MNIST for end-to-end tests.

#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>

#include "lodrank/io.hpp"

namespace lodrank::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lodrank-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string be32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (24 - 8 * i)) & 0xff);
  return s;
}

// Class c lights up rows 2c..2c+1; a faint checkerboard varies by index.
inline void write_synthetic_mnist(const std::string& dir, std::size_t n_train, std::size_t n_test) {
  auto write_split = [&](const std::string& prefix, std::size_t n) {
    std::string img = be32(0x803) + be32(static_cast<std::uint32_t>(n)) + be32(28) + be32(28);
    std::string lab = be32(0x801) + be32(static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = (i * 7 + 3) % 10;
      lab.push_back(static_cast<char>(c));
      for (std::size_t r = 0; r < 28; ++r) {
        for (std::size_t col = 0; col < 28; ++col) {
          int v = ((r + col + i) % 5 == 0) ? 40 : 0;
          if (r / 2 == c + 2 && col > 3 && col < 24) v = 230;
          img.push_back(static_cast<char>(v));
        }
      }
    }
    write_file_atomic(dir + "/" + prefix + "-images-idx3-ubyte", img);
    write_file_atomic(dir + "/" + prefix + "-labels-idx1-ubyte", lab);
  };
  std::filesystem::create_directories(dir);
  write_split("train", n_train);
  write_split("t10k", n_test);
}

}  // namespace lodrank::testing
