#include "capnet/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace capnet {

std::size_t RasterConfig::native_px() const {
  return static_cast<std::size_t>(std::lround(2.0 * lambda_m * px_per_m));
}

void RasterConfig::validate() const {
  if (!(lambda_m > 0.0) || !(px_per_m > 0.0)) {
    throw std::invalid_argument("raster config: lambda and px_per_m must be positive");
  }
  const double native = 2.0 * lambda_m * px_per_m;
  if (std::fabs(native - std::round(native)) > 1e-9) {
    throw std::invalid_argument("raster config: 2 * lambda * px_per_m must be an integer");
  }
  if (out_px == 0) throw std::invalid_argument("raster config: out_px must be positive");
}

std::size_t Raster::count_nonzero() const {
  return static_cast<std::size_t>(
      std::count_if(pixels.begin(), pixels.end(), [](float v) { return v != 0.0f; }));
}

void fill_polygon(Raster& raster, std::span<const Vec2> poly) {
  if (poly.size() < 3) return;
  std::vector<double> xs;
  for (std::size_t r = 0; r < raster.rows; ++r) {
    const double yc = static_cast<double>(r) + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % poly.size()];
      // Half-open in y so shared vertices are counted once.
      if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Columns whose center c + 0.5 lies in [xs[k], xs[k+1]).
      const double lo = std::ceil(xs[k] - 0.5);
      const double hi = std::ceil(xs[k + 1] - 0.5);
      const double n = static_cast<double>(raster.cols);
      const auto c0 = static_cast<std::size_t>(std::clamp(lo, 0.0, n));
      const auto c1 = static_cast<std::size_t>(std::clamp(hi, 0.0, n));
      for (std::size_t c = c0; c < c1; ++c) raster.at(r, c) = 1.0f;
    }
  }
}

Raster extract_layer(const VectorMap& map, Vec2 origin, const RasterConfig& cfg, SemanticLayer layer) {
  const std::size_t n = cfg.native_px();
  Raster out(n, n);
  const double half = cfg.lambda_m * cfg.px_per_m;
  const double window_min_x = origin.x - cfg.lambda_m, window_max_x = origin.x + cfg.lambda_m;
  const double window_min_y = origin.y - cfg.lambda_m, window_max_y = origin.y + cfg.lambda_m;
  std::vector<Vec2> local;
  for (const Polygon& poly : map.polygons(layer)) {
    double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
    for (const Vec2& v : poly) {
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_y = std::min(min_y, v.y);
      max_y = std::max(max_y, v.y);
    }
    if (max_x < window_min_x || min_x > window_max_x || max_y < window_min_y || min_y > window_max_y) {
      continue;
    }
    local.clear();
    for (const Vec2& v : poly) {
      local.push_back({(v.x - origin.x) * cfg.px_per_m + half, (origin.y - v.y) * cfg.px_per_m + half});
    }
    fill_polygon(out, local);
  }
  return out;
}

double agent_rotation_degrees(double yaw) {
  // sign(0) is taken as +1; the term vanishes there anyway.
  const double sign = -yaw < 0.0 ? -1.0 : 1.0;
  return (std::numbers::pi / 2.0 + sign * std::fabs(yaw)) * 180.0 / std::numbers::pi;
}

Raster render_agent_layer(double yaw, double length_m, double width_m, const RasterConfig& cfg) {
  if (!(length_m > 0.0) || !(width_m > 0.0)) {
    throw std::invalid_argument("agent box dimensions must be positive");
  }
  const std::size_t n = cfg.native_px();
  Raster out(n, n);
  const double half = cfg.lambda_m * cfg.px_per_m;
  // Clockwise rotation by rot_deg in world coordinates (y up).
  const double rot = -agent_rotation_degrees(yaw) * std::numbers::pi / 180.0;
  const double cr = std::cos(rot), sr = std::sin(rot);
  const double hl = length_m / 2.0, hw = width_m / 2.0;
  const Vec2 corners[4] = {{-hw, -hl}, {hw, -hl}, {hw, hl}, {-hw, hl}};  // facing +y
  std::vector<Vec2> local;
  for (const Vec2& c : corners) {
    const double x = c.x * cr - c.y * sr;
    const double y = c.x * sr + c.y * cr;
    local.push_back({x * cfg.px_per_m + half, -y * cfg.px_per_m + half});
  }
  fill_polygon(out, local);
  return out;
}

Raster upscale(const Raster& src, std::size_t out_px) {
  Raster out(out_px, out_px);
  if (src.rows == 0 || src.cols == 0) return out;
  const double sy = static_cast<double>(src.rows) / static_cast<double>(out_px);
  const double sx = static_cast<double>(src.cols) / static_cast<double>(out_px);
  for (std::size_t r = 0; r < out_px; ++r) {
    const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(src.rows - 1));
    const auto r0 = static_cast<std::size_t>(fy);
    const std::size_t r1 = std::min(r0 + 1, src.rows - 1);
    const double wy = fy - static_cast<double>(r0);
    for (std::size_t c = 0; c < out_px; ++c) {
      const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(src.cols - 1));
      const auto c0 = static_cast<std::size_t>(fx);
      const std::size_t c1 = std::min(c0 + 1, src.cols - 1);
      const double wx = fx - static_cast<double>(c0);
      const double top = src.at(r0, c0) * (1.0 - wx) + src.at(r0, c1) * wx;
      const double bottom = src.at(r1, c0) * (1.0 - wx) + src.at(r1, c1) * wx;
      out.at(r, c) = static_cast<float>(std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0));
    }
  }
  return out;
}

ChunkStack rasterize_chunk_stack(const VectorMap& map, const AgentState& state, double length_m,
                                 double width_m, const RasterConfig& cfg) {
  ChunkStack stack;
  stack.origin = state.position();
  stack.side = cfg.out_px;
  stack.layers.resize(kLayerCount * cfg.out_px * cfg.out_px);
  auto put = [&](std::size_t channel, const Raster& native) {
    Raster up = upscale(native, cfg.out_px);
    std::copy(up.pixels.begin(), up.pixels.end(),
              stack.layers.begin() + static_cast<std::ptrdiff_t>(channel * cfg.out_px * cfg.out_px));
  };
  for (std::size_t l = 0; l < kMapLayerCount; ++l) {
    put(l, extract_layer(map, stack.origin, cfg, static_cast<SemanticLayer>(l)));
  }
  put(layer_index(SemanticLayer::AgentBox), render_agent_layer(state.yaw, length_m, width_m, cfg));

  const Bounds window{state.x - cfg.lambda_m, state.y - cfg.lambda_m, state.x + cfg.lambda_m,
                      state.y + cfg.lambda_m};
  const auto extent = map.bounds();
  stack.out_of_map = !extent || !extent->contains(window);
  return stack;
}

}  // namespace capnet
