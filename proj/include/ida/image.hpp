#pragma once

// 8-bit RGB images, PNG encode/decode with tEXt metadata, JPEG decode.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ida/common.hpp"

namespace ida {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool empty() const { return rgb.empty(); }
};

// PNG tEXt chunks, keyword -> text.
using TextChunks = std::map<std::string, std::string>;

struct DecodedImage {
  Image image;
  TextChunks text;
};

Bytes encode_png(const Image& image, const TextChunks& text = {});

// Detects PNG or JPEG by magic bytes. Throws Error(kParse) on anything else
// or on a corrupt stream.
DecodedImage decode_image(std::span<const std::uint8_t> bytes);

// Box-filter downsample (or nearest upsample) to side x side.
Image resize_square(const Image& image, int side);

// Grayscale gradient-magnitude edge map, thresholded to {0,255}.
Image edge_map(const Image& image, int threshold = 48);

}  // namespace ida
