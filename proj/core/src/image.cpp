// SPDX-License-Identifier: Apache-2.0
#include "cers/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "cers/errors.hpp"

namespace cers {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int read_ppm_token(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return in ? value : -1;
}

Thumbnail read_ppm(const std::filesystem::path& path, double scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '6')
    throw DataError("not a P6 PPM: " + path.string());
  const int width = read_ppm_token(in);
  const int height = read_ppm_token(in);
  const int maxval = read_ppm_token(in);
  if (width < 1 || height < 1 || maxval != 255)
    throw DataError("unsupported PPM header in " + path.string());
  in.get();  // single whitespace byte before the raster
  Thumbnail thumb;
  thumb.width = width;
  thumb.height = height;
  thumb.scale = scale;
  thumb.pixels.resize(thumb.pixel_count() * 3);
  in.read(reinterpret_cast<char*>(thumb.pixels.data()),
          static_cast<std::streamsize>(thumb.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(thumb.pixels.size()))
    throw DataError("truncated PPM raster in " + path.string());
  return thumb;
}

Thumbnail read_png_file(const std::filesystem::path& path, double scale) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("bad PNG: " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  // Normalize everything to 8-bit RGB.
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Thumbnail thumb;
  thumb.width = static_cast<int>(png_get_image_width(png, info));
  thumb.height = static_cast<int>(png_get_image_height(png, info));
  thumb.scale = scale;
  thumb.pixels.resize(thumb.pixel_count() * 3);

  std::vector<png_bytep> rows(static_cast<std::size_t>(thumb.height));
  const std::size_t stride = static_cast<std::size_t>(thumb.width) * 3;
  for (int y = 0; y < thumb.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        thumb.pixels.data() + static_cast<std::size_t>(y) * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return thumb;
}

}  // namespace

void validate(const Thumbnail& thumb) {
  if (thumb.width < 1 || thumb.height < 1)
    throw DataError("thumbnail dimensions must be >= 1");
  if (!(thumb.scale > 0.0)) throw DataError("thumbnail scale must be > 0");
  if (thumb.pixels.size() != thumb.pixel_count() * 3)
    throw DataError("thumbnail pixel buffer size mismatch");
}

Thumbnail read_thumbnail(const std::filesystem::path& path, double scale) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open " + path.string());
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), 8);
  probe.close();

  static const unsigned char png_magic[8] = {0x89, 'P', 'N', 'G',
                                             0x0d, 0x0a, 0x1a, 0x0a};
  Thumbnail thumb;
  if (std::memcmp(magic, png_magic, 8) == 0) {
    thumb = read_png_file(path, scale);
  } else if (magic[0] == 'P' && magic[1] == '6') {
    thumb = read_ppm(path, scale);
  } else {
    throw DataError("unrecognized image format (expect PNG or P6 PPM): " +
                    path.string());
  }
  validate(thumb);
  return thumb;
}

void write_ppm(const Thumbnail& thumb, const std::filesystem::path& path) {
  validate(thumb);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << thumb.width << " " << thumb.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(thumb.pixels.data()),
            static_cast<std::streamsize>(thumb.pixels.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_png(const Thumbnail& thumb, const std::filesystem::path& path) {
  validate(thumb);
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png write failed: " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(thumb.width),
               static_cast<png_uint_32>(thumb.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(thumb.width) * 3;
  for (int y = 0; y < thumb.height; ++y)
    png_write_row(png, const_cast<png_bytep>(thumb.pixels.data() +
                                             static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace cers
