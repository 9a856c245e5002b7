// Copyright 2026 The gradquant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Reader for the big-endian IDX container used by MNIST. Only unsigned-byte
// payloads are supported (type code 0x08). Files are supplied by the user;
// nothing is downloaded.

#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/problems.hpp"

namespace gradquant {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> in,
                               std::size_t off) {
  if (off + 4 > in.size()) throw DecodeError("IDX header truncated");
  return (std::uint32_t{in[off]} << 24) | (std::uint32_t{in[off + 1]} << 16) |
         (std::uint32_t{in[off + 2]} << 8) | std::uint32_t{in[off + 3]};
}

}  // namespace detail

inline IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if ((magic >> 16) != 0 || ((magic >> 8) & 0xFF) != 0x08) {
    throw DecodeError(detail::concat("IDX: unsupported magic 0x", std::hex,
                                     magic));
  }
  const std::uint32_t ndim = magic & 0xFF;
  if (ndim == 0) throw DecodeError("IDX: zero dimensions");
  IdxArray arr;
  std::size_t total = 1;
  for (std::uint32_t d = 0; d < ndim; ++d) {
    arr.dims.push_back(detail::read_be32(bytes, 4 + 4 * d));
    total *= arr.dims.back();
  }
  const std::size_t off = 4 + 4 * std::size_t{ndim};
  if (bytes.size() < off + total) {
    throw DecodeError(detail::concat("IDX: payload truncated, expected ",
                                     total, " bytes, got ",
                                     bytes.size() - off));
  }
  arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                  bytes.begin() + static_cast<std::ptrdiff_t>(off + total));
  return arr;
}

inline IdxArray read_idx_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

// Pairs an image array (N x rows x cols) with a label array (N); pixels are
// scaled to [0, 1]. `limit` > 0 keeps only the first `limit` samples.
inline Dataset mnist_dataset(const IdxArray& images, const IdxArray& labels,
                             std::size_t limit = 0) {
  if (images.dims.size() != 3) throw DecodeError("IDX images must be 3-D");
  if (labels.dims.size() != 1) throw DecodeError("IDX labels must be 1-D");
  if (images.dims[0] != labels.dims[0]) {
    throw DecodeError("IDX image and label counts differ");
  }
  std::size_t n = images.dims[0];
  if (limit > 0) n = std::min(n, limit);
  Dataset d;
  d.features = std::size_t{images.dims[1]} * images.dims[2];
  d.classes = 10;
  d.x.resize(n * d.features);
  for (std::size_t k = 0; k < d.x.size(); ++k) d.x[k] = images.data[k] / 255.0;
  d.labels.assign(labels.data.begin(),
                  labels.data.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto l : d.labels) {
    if (l >= d.classes) throw DecodeError("IDX label outside 0..9");
  }
  return d;
}

inline Dataset load_mnist(const std::string& dir, std::size_t limit = 0) {
  return mnist_dataset(read_idx_file(dir + "/train-images-idx3-ubyte"),
                       read_idx_file(dir + "/train-labels-idx1-ubyte"), limit);
}

// 784-300-100-10 fully connected network (266,610 parameters).
inline std::vector<std::size_t> fc300_100_layers() {
  return {784, 300, 100, 10};
}

}  // namespace gradquant
