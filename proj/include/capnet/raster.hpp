#pragma once

// Local sparse semantic layers around an agent position.
//
// Raster convention: pixel (row, col) covers a 1/px_per_m square; world x grows
// with the column index and world y grows upward, so row 0 is the top edge of
// the window at y_t + lambda. Occupancy is sampled at pixel centers.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "capnet/map.hpp"

namespace capnet {

struct RasterConfig {
  double lambda_m = 10.0;   // extraction offset: window is p_t +- lambda
  double px_per_m = 3.0;
  std::size_t out_px = 64;  // side length after upscaling

  /// 2 * lambda * px_per_m, the side length before upscaling.
  std::size_t native_px() const;
  void validate() const;

  friend bool operator==(const RasterConfig&, const RasterConfig&) = default;
};

struct Raster {
  Raster() = default;
  Raster(std::size_t rows, std::size_t cols) : rows(rows), cols(cols), pixels(rows * cols, 0.0f) {}

  std::size_t rows = 0, cols = 0;
  std::vector<float> pixels;  // row-major

  float at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
  std::size_t count_nonzero() const;
};

/// Binary occupancy of one map layer in the window centered at `origin`.
Raster extract_layer(const VectorMap& map, Vec2 origin, const RasterConfig& cfg, SemanticLayer layer);

/// Rotation applied to the upward-facing agent box: ((pi/2) + sign(-yaw)*|yaw|) in degrees.
double agent_rotation_degrees(double yaw);

/// Filled agent box centered in the window. The box starts facing up and is
/// turned by agent_rotation_degrees(yaw) clockwise, which lines its long axis
/// up with the heading.
Raster render_agent_layer(double yaw, double length_m, double width_m, const RasterConfig& cfg);

/// Bilinear resampling with half-pixel centers and clamped borders.
Raster upscale(const Raster& src, std::size_t out_px);

struct ChunkStack {
  Vec2 origin;
  std::size_t side = 0;
  std::vector<float> layers;  // [kLayerCount x side x side] in SemanticLayer order
  bool out_of_map = false;    // window reaches past the map's bounding box

  std::span<const float> channel(std::size_t i) const {
    return std::span<const float>(layers).subspan(i * side * side, side * side);
  }
};

ChunkStack rasterize_chunk_stack(const VectorMap& map, const AgentState& state, double length_m,
                                 double width_m, const RasterConfig& cfg);

/// Scanline fill of a polygon given in continuous pixel coordinates
/// (x = column axis, y = row axis). A pixel is set when its center is inside.
void fill_polygon(Raster& raster, std::span<const Vec2> pixel_polygon);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const Raster& raster);
void write_pgm(const std::string& path, std::span<const float> pixels, std::size_t side);
Raster read_pgm(const std::string& path);

}  // namespace capnet
