#include "edgefit/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include <png.h>

namespace edgefit {

namespace {

std::uint8_t toByte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Next header token of a PNM file, skipping whitespace and '#' comments.
std::string pnmToken(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw ParseError("pgm header", "truncated header in " + path);
  return tok;
}

int pnmInt(std::istream& in, const std::string& path, const char* field) {
  const std::string tok = pnmToken(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(field, "invalid value '" + tok + "' in " + path);
  }
}

GrayImage readPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open image");
  const std::string p = path.string();
  if (pnmToken(in, p) != "P5") throw ParseError("pgm magic", "only binary P5 PGM is supported: " + p);
  const int w = pnmInt(in, p, "width");
  const int h = pnmInt(in, p, "height");
  const int maxval = pnmInt(in, p, "maxval");
  if (maxval > 65535) throw ParseError("maxval", "maxval above 65535 in " + p);
  GrayImage img(w, h);
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * (wide ? 2 : 1));
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw ParseError("pixels", "truncated pixel data in " + p);
  }
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const unsigned v = wide ? (unsigned{buf[2 * i]} << 8) | buf[2 * i + 1] : buf[i];
    img.data()[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

GrayImage readPng(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError(path.string(), "cannot open image");
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!g.png) throw Error("libpng initialisation failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw Error("libpng initialisation failed");
  if (setjmp(png_jmpbuf(g.png))) throw ParseError("png", "corrupt PNG file: " + path.string());

  png_init_io(g.png, file.get());
  png_read_info(g.png, g.info);
  const int w = static_cast<int>(png_get_image_width(g.png, g.info));
  const int h = static_cast<int>(png_get_image_height(g.png, g.info));
  const int colorType = png_get_color_type(g.png, g.info);
  const int depth = png_get_bit_depth(g.png, g.info);

  if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (colorType == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
  if (depth == 16) png_set_strip_16(g.png);
  if (colorType & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(g.png);
  if (colorType == PNG_COLOR_TYPE_RGB || colorType == PNG_COLOR_TYPE_RGB_ALPHA ||
      colorType == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(g.png, 1, -1, -1);
  }
  png_read_update_info(g.png, g.info);
  const std::size_t rowBytes = png_get_rowbytes(g.png, g.info);
  std::vector<unsigned char> buf(rowBytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowBytes * y;
  png_read_image(g.png, rows.data());

  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img(x, y) = rows[y][x] / 255.0;
  }
  return img;
}

}  // namespace

GrayImage readImage(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(path.string(), "image file not found");
  std::ifstream probe(path, std::ios::binary);
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  if (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return readPng(path);
  return readPgm(path);
}

void writePgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open image for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = toByte(image.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

void writePgm16Normalized(const Image<double>& field, const std::filesystem::path& path) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : field.data()) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double range = (hi > lo) ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open image for writing");
  out << "P5\n" << field.width() << ' ' << field.height() << "\n65535\n";
  for (double v : field.data()) {
    const double n = std::isfinite(v) ? (v - lo) / range : 1.0;
    const auto q = static_cast<unsigned>(std::lround(std::clamp(n, 0.0, 1.0) * 65535.0));
    out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xff));
  }
  if (!out) throw IoError(path.string(), "write failed");
}

void writePpm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open image for writing");
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (const auto& px : image.data()) out.write(reinterpret_cast<const char*>(px.data()), 3);
  if (!out) throw IoError(path.string(), "write failed");
}

void writePng(const GrayImage& image, const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(path.string(), "cannot open image for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<unsigned char> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = toByte(image.data()[i]);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), "PNG write failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    png_write_row(png, buf.data() + static_cast<std::size_t>(y) * image.width());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage quantize8(const GrayImage& image) {
  GrayImage out = image;
  for (double& v : out.data()) v = toByte(v) / 255.0;
  return out;
}

}  // namespace edgefit
