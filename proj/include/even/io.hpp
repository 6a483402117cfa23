// Copyright 2026 The even authors
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

#ifndef EVEN_IO_HPP
#define EVEN_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/tensor.hpp"

namespace even {

namespace ioimpl {
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}
template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace ioimpl

// ---------------------------------------------------------------------------
// DPT1: raw float32 depth maps. Header "DPT1", u16 W, u16 H (12 bytes incl.
// 4 reserved), then H*W row-major float32, little-endian.
// ---------------------------------------------------------------------------

inline void save_depth(const std::string& path, const Tensor<float>& depth) {
  if (depth.rank() != 2) throw std::invalid_argument("save_depth: want H x W");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_depth: cannot open " + path);
  os.write("DPT1", 4);
  ioimpl::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.dim(1)));
  ioimpl::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(depth.dim(0)));
  ioimpl::write_le<std::uint32_t>(os, 0);  // reserved
  for (std::int64_t i = 0; i < depth.numel(); ++i)
    ioimpl::write_le<float>(os, depth[i]);
}

inline Tensor<float> load_depth(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_depth: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "DPT1")
    throw std::runtime_error("load_depth: bad magic in " + path);
  const int w = ioimpl::read_le<std::uint16_t>(is);
  const int h = ioimpl::read_le<std::uint16_t>(is);
  ioimpl::read_le<std::uint32_t>(is);
  Tensor<float> depth({h, w});
  for (std::int64_t i = 0; i < depth.numel(); ++i)
    depth[i] = ioimpl::read_le<float>(is);
  if (!is) throw std::runtime_error("load_depth: truncated file " + path);
  return depth;
}

// ---------------------------------------------------------------------------
// PNG round trip for CHW float images in [0,1].
// ---------------------------------------------------------------------------

inline cv::Mat chw_to_mat8(const Tensor<float>& img) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw std::invalid_argument("chw_to_mat8: want 3 x H x W");
  const int h = img.dim(1), w = img.dim(2);
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto q = [&](int c) {
        float v = std::clamp(img(c, y, x), 0.0f, 1.0f);
        return static_cast<std::uint8_t>(std::lround(v * 255.0f));
      };
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));  // BGR
    }
  }
  return m;
}

inline Tensor<float> mat8_to_chw(const cv::Mat& m) {
  if (m.type() != CV_8UC3) throw std::invalid_argument("mat8_to_chw: want 8UC3");
  Tensor<float> img({3, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const cv::Vec3b px = m.at<cv::Vec3b>(y, x);
      img(0, y, x) = px[2] / 255.0f;
      img(1, y, x) = px[1] / 255.0f;
      img(2, y, x) = px[0] / 255.0f;
    }
  }
  return img;
}

inline void save_png(const std::string& path, const Tensor<float>& img) {
  if (!cv::imwrite(path, chw_to_mat8(img), {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw std::runtime_error("save_png: cannot write " + path);
}

inline Tensor<float> load_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw std::runtime_error("load_png: cannot read " + path);
  return mat8_to_chw(m);
}

// ---------------------------------------------------------------------------
// EVNP parameter container: "EVNP", version byte 0x01, then named tensors:
// u16 name length, name bytes, u8 rank, u32 dims, float32 data. Little-endian,
// streamed until EOF.
// ---------------------------------------------------------------------------

using NamedTensors = std::map<std::string, Tensor<float>>;

inline void save_params(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  os.write("EVNP", 4);
  os.put(0x01);
  for (const auto& [name, t] : tensors) {
    ioimpl::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.rank()));
    for (int i = 0; i < t.rank(); ++i)
      ioimpl::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim(i)));
    for (std::int64_t i = 0; i < t.numel(); ++i)
      ioimpl::write_le<float>(os, t[i]);
  }
}

inline NamedTensors load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EVNP")
    throw std::runtime_error("load_params: bad magic in " + path);
  const int version = is.get();
  if (version != 0x01)
    throw std::runtime_error("load_params: unsupported version in " + path);
  NamedTensors out;
  while (true) {
    const std::uint16_t nlen = ioimpl::read_le<std::uint16_t>(is);
    if (!is) break;
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const int rank = is.get();
    std::vector<int> shape;
    for (int i = 0; i < rank; ++i)
      shape.push_back(static_cast<int>(ioimpl::read_le<std::uint32_t>(is)));
    Tensor<float> t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t[i] = ioimpl::read_le<float>(is);
    if (!is) throw std::runtime_error("load_params: truncated file " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

inline bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::vector<char> ba((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  return ba == bb;
}

}  // namespace even

#endif  // EVEN_IO_HPP
