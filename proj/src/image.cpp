#include "ida/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>

namespace ida {
namespace {

struct PngReadBuffer {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + len > buf->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->data.data() + buf->offset, len);
  buf->offset += len;
}

void png_write_cb(png_structp png, png_bytep in, png_size_t len) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + len);
}

void png_flush_cb(png_structp) {}

[[noreturn]] void png_error_cb(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  longjmp(png_jmpbuf(png), 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

DecodedImage decode_png(std::span<const std::uint8_t> bytes) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw Error(ErrorKind::kParse, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  png_infop end_info = png_create_info_struct(png);
  DecodedImage out;
  std::vector<png_bytep> rows;
  PngReadBuffer buf{bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, &end_info);
    throw Error(ErrorKind::kParse, "png: " + err);
  }
  png_set_read_fn(png, &buf, png_read_cb);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.image = Image(static_cast<int>(w), static_cast<int>(h));
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.image.at(0, static_cast<int>(y));
  png_read_image(png, rows.data());
  png_read_end(png, end_info);
  for (png_infop src : {info, end_info}) {
    png_textp text = nullptr;
    int n = 0;
    png_get_text(png, src, &text, &n);
    for (int i = 0; i < n; ++i) out.text[text[i].key] = std::string(text[i].text, text[i].text_length);
  }
  png_destroy_read_struct(&png, &info, &end_info);
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

DecodedImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  DecodedImage out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::kParse, std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.image = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.image.at(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

Bytes encode_png(const Image& image, const TextChunks& text) {
  if (image.empty()) throw Error(ErrorKind::kInvalidRequest, "png: empty image");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw Error(ErrorKind::kIo, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  std::vector<png_text> chunks;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIo, "png: " + err);
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (const auto& [key, value] : text) {
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = const_cast<char*>(key.c_str());
    t.text = const_cast<char*>(value.c_str());
    t.text_length = value.size();
    chunks.push_back(t);
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
  png_write_info(png, info);
  rows.resize(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(image.at(0, y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

DecodedImage decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin()))
    return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return decode_jpeg(bytes);
  throw Error(ErrorKind::kParse, "unsupported image format");
}

Image resize_square(const Image& image, int side) {
  Image out(side, side);
  const double sx = static_cast<double>(image.width) / side;
  const double sy = static_cast<double>(image.height) / side;
  for (int y = 0; y < side; ++y) {
    int y0 = static_cast<int>(std::floor(y * sy));
    int y1 = std::max(y0 + 1, static_cast<int>(std::floor((y + 1) * sy)));
    y1 = std::min(y1, image.height);
    for (int x = 0; x < side; ++x) {
      int x0 = static_cast<int>(std::floor(x * sx));
      int x1 = std::max(x0 + 1, static_cast<int>(std::floor((x + 1) * sx)));
      x1 = std::min(x1, image.width);
      double acc[3] = {0, 0, 0};
      int count = 0;
      for (int yy = y0; yy < y1; ++yy)
        for (int xx = x0; xx < x1; ++xx) {
          const auto* p = image.at(xx, yy);
          for (int c = 0; c < 3; ++c) acc[c] += p[c];
          ++count;
        }
      auto* q = out.at(x, y);
      for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>(std::lround(acc[c] / count));
    }
  }
  return out;
}

Image edge_map(const Image& image, int threshold) {
  Image out(image.width, image.height);
  auto gray = [&](int x, int y) {
    x = std::clamp(x, 0, image.width - 1);
    y = std::clamp(y, 0, image.height - 1);
    const auto* p = image.at(x, y);
    return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  };
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      double gx = gray(x + 1, y) - gray(x - 1, y);
      double gy = gray(x, y + 1) - gray(x, y - 1);
      std::uint8_t v = std::hypot(gx, gy) >= threshold ? 255 : 0;
      auto* q = out.at(x, y);
      q[0] = q[1] = q[2] = v;
    }
  return out;
}

}  // namespace ida
