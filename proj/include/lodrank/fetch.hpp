// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Download of the MNIST IDX files with digest pinning.

#pragma once

#include <string>
#include <vector>

#include "lodrank/io.hpp"

namespace lodrank {

/// Downloaded or decompressed bytes do not hash to the pinned digest.
class DigestMismatch : public IoError {
 public:
  using IoError::IoError;
};

struct FetchItem {
  std::string remote;  ///< file name under the base URL (gzip-compressed)
  std::string local;   ///< decompressed file name in the target directory
  std::string sha256;  ///< lowercase hex digest of the decompressed file
};

/// The four standard MNIST files.
const std::vector<FetchItem>& mnist_manifest();

constexpr const char* kDefaultMnistUrl = "https://ossci-datasets.s3.amazonaws.com/mnist/";

std::string sha256_hex(const std::string& bytes);
std::string gunzip(const std::string& compressed);

/// Fetches a URL (any scheme libcurl handles, including file://).
std::string fetch_url(const std::string& url);

/// Ensures every item is present in `dir` with its pinned digest. Files that
/// already match are left alone; returns the names that were downloaded.
std::vector<std::string> fetch_files(const std::string& dir, const std::string& base_url,
                                     const std::vector<FetchItem>& items);

}  // namespace lodrank
