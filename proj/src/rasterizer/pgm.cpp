#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "capnet/raster.hpp"

namespace capnet {

void write_pgm(const std::string& path, std::span<const float> pixels, std::size_t side) {
  if (pixels.size() != side * side) throw std::invalid_argument("write_pgm: pixel count mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P5\n" << side << ' ' << side << "\n255\n";
  std::string bytes(pixels.size(), '\0');
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::clamp(static_cast<double>(pixels[i]), 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path);
}

void write_pgm(const std::string& path, const Raster& raster) {
  if (raster.rows != raster.cols) throw std::invalid_argument("write_pgm: raster must be square");
  write_pgm(path, raster.pixels, raster.rows);
}

Raster read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w == 0 || h == 0 || maxval != 255) {
    throw std::runtime_error(path + ": not an 8-bit binary PGM");
  }
  is.get();  // single whitespace before the raster
  std::string bytes(w * h, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error(path + ": truncated PGM data");
  }
  Raster out(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[i])) / 255.0f;
  }
  return out;
}

}  // namespace capnet
