#include "funet/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace funet {

void write_pgm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_pgm: cannot open " + path);
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> bytes(size_t(img.numel()));
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    float v = img.pix[size_t(i)];
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    bytes[size_t(i)] = static_cast<unsigned char>(std::lround(v * 255.f));
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw Error("write_pgm: write failed for " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_pgm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw Error("read_pgm: " + path + " is not a binary P5 PGM");
  int w = 0, h = 0, maxval = 0;
  // skip whitespace and '#' comment lines between header tokens
  auto next_int = [&f, &path]() {
    int ch = f.get();
    while (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '#') {
      if (ch == '#')
        while (ch != '\n' && ch != EOF) ch = f.get();
      ch = f.get();
    }
    f.unget();
    int v = 0;
    if (!(f >> v)) throw Error("read_pgm: malformed header in " + path);
    return v;
  };
  w = next_int();
  h = next_int();
  maxval = next_int();
  if (w < 1 || h < 1 || maxval != 255)
    throw Error("read_pgm: unsupported PGM header in " + path + " (need maxval 255)");
  f.get();  // single whitespace after maxval
  Image img(h, w);
  std::vector<unsigned char> bytes(size_t(img.numel()));
  f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (f.gcount() != std::streamsize(bytes.size()))
    throw Error("read_pgm: truncated pixel data in " + path);
  for (std::int64_t i = 0; i < img.numel(); ++i)
    img.pix[size_t(i)] = float(bytes[size_t(i)]) / 255.f;
  return img;
}

}  // namespace funet
