#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <png.h>

#include <json.hpp>

#include "fpp/core/atomic_file.hpp"
#include "fpp/core/error.hpp"
#include "fpp/core/image.hpp"

namespace fpp {

static_assert(std::endian::native == std::endian::little, "raw f32 planes assume a little-endian host");

/// A decoded grayscale image normalized to [0, 1] plus the bit depth it came from.
struct LoadedImage {
  ImageF64 pixels;
  int bit_depth = 8;
};

namespace detail {

inline bool has_extension(const std::filesystem::path& p, std::string_view ext) {
  std::string e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

inline LoadedImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  const bool sixteen = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  image.format = sixteen ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  LoadedImage out{ImageF64(w, h), sixteen ? 16 : 8};
  if (sixteen) {
    std::vector<std::uint16_t> buf(static_cast<std::size_t>(w) * h);
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
      throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = buf[i] / 65535.0;
  } else {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
      throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = buf[i] / 255.0;
  }
  return out;
}

inline LoadedImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") throw FormatError("not a binary PGM (P5): " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("bad PGM header: " + path.string());
  LoadedImage out{ImageF64(w, h), maxval > 255 ? 16 : 8};
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (maxval > 255) {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw FormatError("truncated PGM: " + path.string());
    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = ((buf[2 * i] << 8) | buf[2 * i + 1]) / double(maxval);
  } else {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw FormatError("truncated PGM: " + path.string());
    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = buf[i] / double(maxval);
  }
  return out;
}

struct PngWriteState {
  std::FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteState() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
  }
};

inline void png_ignore_warning(png_structp, png_const_charp) {}

/// Grayscale PNG at zlib level 1 without row filters: the outputs are noisy
/// camera frames and binary masks, where stronger settings mostly cost time.
template <typename Pixel>
void write_png_buffer(const std::filesystem::path& path, int w, int h, const Pixel* data) {
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    PngWriteState st;
    st.file = std::fopen(tmp.string().c_str(), "wb");
    if (!st.file) throw IoError("cannot open " + tmp.string() + " for writing");
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_ignore_warning);
    if (!st.png) throw IoError("libpng initialisation failed");
    st.info = png_create_info_struct(st.png);
    if (!st.info) throw IoError("libpng initialisation failed");
    // libpng reports errors by longjmp; nothing below owns resources.
    if (setjmp(png_jmpbuf(st.png))) throw IoError("libpng failed writing " + path.string());
    png_init_io(st.png, st.file);
    png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), sizeof(Pixel) * 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(st.png, 1);
    png_set_filter(st.png, 0, PNG_FILTER_NONE);
    png_write_info(st.png, st.info);
    if (sizeof(Pixel) == 2) png_set_swap(st.png);  // PNG stores 16-bit samples big-endian
    for (int y = 0; y < h; ++y)
      png_write_row(st.png, reinterpret_cast<png_const_bytep>(data + static_cast<std::size_t>(y) * static_cast<std::size_t>(w)));
    png_write_end(st.png, nullptr);
    if (std::fflush(st.file) != 0) throw IoError("write failed: " + path.string());
  });
}

}  // namespace detail

/// Reads an 8- or 16-bit grayscale PNG or binary PGM; color PNGs are converted to luminance.
inline LoadedImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (detail::has_extension(path, ".pgm")) return detail::read_pgm(path);
  return detail::read_png(path);
}

inline Image<std::uint8_t> quantize8(const ImageF64& image) {
  Image<std::uint8_t> out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

inline Image<std::uint16_t> quantize16(const ImageF64& image) {
  Image<std::uint16_t> out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    out[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& image) {
  detail::write_png_buffer(path, image.width(), image.height(), image.data());
}

inline void write_png(const std::filesystem::path& path, const Image<std::uint16_t>& image) {
  detail::write_png_buffer(path, image.width(), image.height(), image.data());
}

/// Writes a [0,1] intensity image at 8 or 16 bits. PGM output when the path ends in .pgm.
inline void write_image(const std::filesystem::path& path, const ImageF64& image, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("bit depth must be 8 or 16");
  if (detail::has_extension(path, ".pgm")) {
    write_atomically(path, [&](const std::filesystem::path& tmp) {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw IoError("cannot open " + tmp.string());
      out << "P5\n" << image.width() << ' ' << image.height() << '\n' << (bit_depth == 8 ? 255 : 65535) << '\n';
      if (bit_depth == 8) {
        auto q = quantize8(image);
        out.write(reinterpret_cast<const char*>(q.data()), static_cast<std::streamsize>(q.size()));
      } else {
        auto q = quantize16(image);
        for (std::size_t i = 0; i < q.size(); ++i) {
          const char be[2] = {static_cast<char>(q[i] >> 8), static_cast<char>(q[i] & 0xff)};
          out.write(be, 2);
        }
      }
      if (!out) throw IoError("write failed: " + path.string());
    });
    return;
  }
  if (bit_depth == 8)
    write_png(path, quantize8(image));
  else
    write_png(path, quantize16(image));
}

inline Image<std::uint8_t> mask_to_gray(const Mask& mask) {
  Image<std::uint8_t> out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  return out;
}

/// Binary mask from an image file: any pixel above half scale is foreground.
inline Mask read_mask(const std::filesystem::path& path) {
  auto img = read_image(path);
  Mask out(img.pixels.width(), img.pixels.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] > 0.5 ? 1 : 0;
  return out;
}

// Raw float planes: little-endian float32, row-major, no header in the data
// file. Shape lives in a JSON sidecar `<file>.json`. Non-finite values mark
// missing data.

inline void write_f32(const std::filesystem::path& path, const ImageF64& image) {
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string());
    std::vector<float> buf(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) buf[i] = static_cast<float>(image[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path.string());
  });
  nlohmann::json side = {{"schema_version", 1},
                         {"width", image.width()},
                         {"height", image.height()},
                         {"dtype", "f32le"},
                         {"layout", "row-major"},
                         {"missing", "nan"}};
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  write_text_file(sidecar, side.dump(2) + "\n");
}

inline ImageF64 read_f32(const std::filesystem::path& path) {
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text_file(sidecar));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad sidecar ") + sidecar.string() + ": " + e.what());
  }
  if (!side.contains("width") || !side.contains("height")) throw FormatError("sidecar lacks width/height", 0, "width");
  if (side.value("dtype", std::string("f32le")) != "f32le") throw FormatError("unsupported dtype", 0, "dtype");
  const int w = side["width"].get<int>();
  const int h = side["height"].get<int>();
  ImageF64 out(w, h);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<float> buf(out.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw FormatError("truncated f32 plane: " + path.string());
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
  return out;
}

}  // namespace fpp
