#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

// 8-bit lossless image persistence via binary NetPBM: P6 for three channels,
// P5 for one. Patches and references must survive the disk round trip with
// at most quantization error, so lossy formats are refused outright.

inline std::uint8_t quantize_8bit(double v) {
  const long q = std::lround(v * 255.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
}

namespace detail {

inline void check_writable_format(const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  std::string lower;
  for (char ch : ext) lower += static_cast<char>(std::tolower(ch));
  if (lower == ".jpg" || lower == ".jpeg" || lower == ".webp")
    throw DomainError("refusing lossy image format: " + path);
  if (lower != ".ppm" && lower != ".pgm" && lower != ".pnm")
    throw DomainError("unsupported image format (use .ppm/.pgm): " + path);
}

inline int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then reads one non-negative integer.
  int ch = in.get();
  for (;;) {
    while (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') ch = in.get();
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
      continue;
    }
    break;
  }
  int value = 0;
  bool any = false;
  while (ch >= '0' && ch <= '9') {
    value = value * 10 + (ch - '0');
    any = true;
    ch = in.get();
  }
  if (!any) throw Error("malformed NetPBM header");
  return value;
}

}  // namespace detail

inline void write_image_8bit(const std::string& path, const Tensor& pixels) {
  detail::check_writable_format(path);
  if (pixels.channels() != 1 && pixels.channels() != 3)
    throw DomainError("write_image_8bit: only 1 or 3 channels supported");
  namespace fs = std::filesystem;
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open image file for writing: " + path);
  out << (pixels.channels() == 3 ? "P6" : "P5") << "\n"
      << pixels.width() << " " << pixels.height() << "\n255\n";
  std::string raw;
  raw.reserve(pixels.size());
  for (int i = 0; i < pixels.height(); ++i)
    for (int j = 0; j < pixels.width(); ++j)
      for (int k = 0; k < pixels.channels(); ++k)
        raw.push_back(static_cast<char>(quantize_8bit(pixels(i, j, k))));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error("failed writing image file: " + path);
}

inline Tensor read_image_8bit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image file: " + path);
  char p = 0, kind = 0;
  in.get(p);
  in.get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw Error("unsupported image file (expected binary P5/P6): " + path);
  const int channels = kind == '6' ? 3 : 1;
  const int width = detail::read_pnm_token(in);
  const int height = detail::read_pnm_token(in);
  const int maxval = detail::read_pnm_token(in);
  if (maxval != 255) throw Error("unsupported NetPBM maxval (need 255): " + path);
  // header token reader consumed the single whitespace after maxval
  std::string raw(static_cast<std::size_t>(height) * width * channels, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw Error("truncated image file: " + path);
  Tensor pixels(height, width, channels);
  for (std::size_t idx = 0; idx < pixels.size(); ++idx)
    pixels[idx] = static_cast<double>(static_cast<std::uint8_t>(raw[idx])) / 255.0;
  return pixels;
}

// The patch as persisted: quantized to the 8-bit grid and back.
inline Tensor quantize_roundtrip(const Tensor& pixels) {
  Tensor out(pixels.height(), pixels.width(), pixels.channels());
  for (std::size_t idx = 0; idx < pixels.size(); ++idx)
    out[idx] = static_cast<double>(quantize_8bit(pixels[idx])) / 255.0;
  return out;
}

}  // namespace vrap
