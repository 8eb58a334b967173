#include <algorithm>
#include <cmath>
#include <numbers>

#include "capnet/scenario.hpp"

namespace capnet {
namespace {

constexpr double kPi = std::numbers::pi;

struct Pose {
  Vec2 p;
  double heading = 0.0;
};

Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

// Constant-curvature piece of a centerline; curvature 0 is a straight line.
struct Piece {
  Pose start;
  double length = 0.0;
  double curvature = 0.0;

  Pose at(double s) const {
    const double h = start.heading;
    if (curvature == 0.0) {
      return {{start.p.x + s * std::cos(h), start.p.y + s * std::sin(h)}, h};
    }
    const double h1 = h + curvature * s;
    return {{start.p.x + (std::sin(h1) - std::sin(h)) / curvature,
             start.p.y + (std::cos(h) - std::cos(h1)) / curvature},
            h1};
  }
};

// Arc-length parameterized centerline, extended tangentially past both ends.
class Path {
 public:
  explicit Path(Pose start) : cursor_(start) {}

  Path& line(double length) { return add(length, 0.0); }
  Path& arc(double radius, double turn) {  // turn > 0 is to the left
    return add(radius * std::fabs(turn), turn > 0 ? 1.0 / radius : -1.0 / radius);
  }

  double length() const { return total_; }

  Pose at(double s) const {
    if (s <= 0.0) return Piece{pieces_.front().start, 0.0, 0.0}.at(s);
    double base = 0.0;
    for (const Piece& piece : pieces_) {
      if (s <= base + piece.length) return piece.at(s - base);
      base += piece.length;
    }
    return Piece{cursor_, 0.0, 0.0}.at(s - total_);
  }

  /// Same path shifted sideways by `d` (positive to the left).
  Path offset(double d) const {
    Path out({shift(pieces_.front().start, d)});
    for (const Piece& piece : pieces_) {
      const double scale = 1.0 - piece.curvature * d;
      out.add(piece.length * scale, piece.curvature / scale);
    }
    return out;
  }

  Path reversed() const {
    Pose end = cursor_;
    end.heading += kPi;
    Path out(end);
    for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) out.add(it->length, -it->curvature);
    return out;
  }

 private:
  static Pose shift(Pose pose, double d) {
    const Vec2 n = left_normal(pose.heading);
    return {{pose.p.x + d * n.x, pose.p.y + d * n.y}, pose.heading};
  }

  Path& add(double length, double curvature) {
    pieces_.push_back({cursor_, length, curvature});
    cursor_ = pieces_.back().at(length);
    total_ += length;
    return *this;
  }

  std::vector<Piece> pieces_;
  Pose cursor_;
  double total_ = 0.0;
};

// Strip between lateral offsets [lo, hi] along path arc length [s0, s1].
Polygon strip(const Path& path, double s0, double s1, double lo, double hi) {
  const int steps = std::max(1, static_cast<int>(std::ceil((s1 - s0) / 1.0)));
  Polygon left, right;
  for (int i = 0; i <= steps; ++i) {
    const Pose pose = path.at(s0 + (s1 - s0) * i / steps);
    const Vec2 n = left_normal(pose.heading);
    right.push_back({pose.p.x + lo * n.x, pose.p.y + lo * n.y});
    left.push_back({pose.p.x + hi * n.x, pose.p.y + hi * n.y});
  }
  Polygon poly = right;
  poly.insert(poly.end(), left.rbegin(), left.rend());
  return poly;
}

struct RoadProfile {
  double lane = 3.5;       // single lane width
  double segment = 7.0;    // road segment width
  double drivable = 9.0;   // drivable area width
  double walkway = 3.5;
  double curb_gap = 1.0;   // between drivable edge and walkway

  static RoadProfile sample(Rng& rng) {
    RoadProfile r;
    r.lane = rng.uniform(3.0, 4.0);
    r.segment = rng.uniform(std::max(6.0, 2.0 * r.lane), 8.0);
    r.drivable = rng.uniform(std::max(8.0, r.segment + 0.5), 11.0);
    r.walkway = rng.uniform(3.0, 4.5);
    r.curb_gap = rng.uniform(0.5, 2.0);
    return r;
  }

  double walk_inner() const { return drivable / 2.0 + curb_gap; }
  double walk_outer() const { return walk_inner() + walkway; }
  /// Lateral offset of the right-hand lane centerline.
  double lane_center() const { return -lane / 2.0; }
};

// Adds drivable area, road segment pieces and both lanes over [s0, s1].
void add_roadway(VectorMap& map, const Path& road, const RoadProfile& r, double s0, double s1,
                 double piece_length) {
  map.polygons(SemanticLayer::DrivableArea).push_back(strip(road, s0, s1, -r.drivable / 2, r.drivable / 2));
  const int pieces = std::max(1, static_cast<int>(std::round((s1 - s0) / piece_length)));
  for (int i = 0; i < pieces; ++i) {
    const double a = s0 + (s1 - s0) * i / pieces, b = s0 + (s1 - s0) * (i + 1) / pieces;
    map.polygons(SemanticLayer::RoadSegment).push_back(strip(road, a, b, -r.segment / 2, r.segment / 2));
  }
  constexpr double kMarking = 0.15;
  map.polygons(SemanticLayer::Lane).push_back(strip(road, s0, s1, -r.lane, -kMarking));
  map.polygons(SemanticLayer::Lane).push_back(strip(road, s0, s1, kMarking, r.lane));
}

void add_walkways(VectorMap& map, const Path& road, const RoadProfile& r, double s0, double s1) {
  if (s1 - s0 < 1.0) return;
  map.polygons(SemanticLayer::Walkway).push_back(strip(road, s0, s1, r.walk_inner(), r.walk_outer()));
  map.polygons(SemanticLayer::Walkway).push_back(strip(road, s0, s1, -r.walk_outer(), -r.walk_inner()));
}

struct SpeedProfile {
  double s0 = 0.0, v0 = 0.0, accel = 0.0;
  double at(double t) const { return s0 + v0 * t + 0.5 * accel * t * t; }
};

// Samples positions at k = -2 .. n+1 so every stored state has central
// differences for both velocity and acceleration.
Track make_track(std::string id, const Path& lane, const SpeedProfile& speed, std::size_t n, Rng& rng) {
  Track track;
  track.agent_id = std::move(id);
  track.length_m = rng.uniform(3.8, 5.2);
  track.width_m = rng.uniform(1.7, 2.1);
  std::vector<Vec2> pos;
  for (long k = -2; k <= static_cast<long>(n) + 1; ++k) {
    pos.push_back(lane.at(speed.at(static_cast<double>(k) * kStepSeconds)).p);
  }
  const double dt2 = 2.0 * kStepSeconds;
  auto velocity = [&](std::size_t i) {  // i indexes pos
    return Vec2{(pos[i + 1].x - pos[i - 1].x) / dt2, (pos[i + 1].y - pos[i - 1].y) / dt2};
  };
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = k + 2;
    AgentState s;
    s.t = static_cast<double>(k) * kStepSeconds;
    s.x = pos[i].x;
    s.y = pos[i].y;
    const Vec2 v = velocity(i), vp = velocity(i - 1), vn = velocity(i + 1);
    s.vx = v.x;
    s.vy = v.y;
    s.ax = (vn.x - vp.x) / dt2;
    s.ay = (vn.y - vp.y) / dt2;
    s.yaw = std::atan2(v.y, v.x);
    if (s.yaw == -kPi) s.yaw = kPi;
    track.states.push_back(s);
  }
  return track;
}

double track_duration(std::size_t n) { return static_cast<double>(n + 2) * kStepSeconds; }

// Constant acceleration with the speed kept at or above 1.5 m/s for the whole track.
SpeedProfile accelerating_profile(Rng& rng, double s0, double v0, double duration) {
  SpeedProfile sp{s0, v0, rng.uniform(-1.0, 1.0)};
  const double v_min = 1.5;
  if (v0 + sp.accel * duration < v_min) sp.accel = (v_min - v0) / duration;
  return sp;
}

Scenario straight_scene(Rng& rng, std::size_t n_agents, std::size_t n) {
  const RoadProfile r = RoadProfile::sample(rng);
  const double heading = rng.uniform(-kPi, kPi);
  const double half = 130.0;
  const Vec2 center{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
  Path road({{center.x - half * std::cos(heading), center.y - half * std::sin(heading)}, heading});
  road.line(2.0 * half);

  Scenario sc;
  add_roadway(sc.map, road, r, 0.0, road.length(), 40.0);
  add_walkways(sc.map, road, r, 0.0, road.length());
  const double duration = track_duration(n);
  for (std::size_t a = 0; a < n_agents; ++a) {
    const bool forward = rng.uniform() < 0.5;
    const Path lane = (forward ? road : road.reversed()).offset(r.lane_center());
    const double v = rng.uniform(4.0, 14.0);
    const double s0 = rng.uniform(10.0, std::max(10.0, lane.length() - 10.0 - v * duration));
    sc.tracks.push_back(make_track("agent_" + std::to_string(a), lane, {s0, v, 0.0}, n, rng));
  }
  return sc;
}

Scenario curve_scene(Rng& rng, std::size_t n_agents, std::size_t n) {
  const RoadProfile r = RoadProfile::sample(rng);
  const double radius = rng.uniform(25.0, 80.0);
  const double turn = (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(30.0, 120.0) * kPi / 180.0;
  const double lead = 110.0;
  Path road({{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)}, rng.uniform(-kPi, kPi)});
  road.line(lead).arc(radius, turn).line(lead);

  Scenario sc;
  add_roadway(sc.map, road, r, 0.0, road.length(), 40.0);
  add_walkways(sc.map, road, r, 0.0, road.length());
  const double duration = track_duration(n);
  const double arc_mid = lead + radius * std::fabs(turn) / 2.0;
  for (std::size_t a = 0; a < n_agents; ++a) {
    const bool forward = rng.uniform() < 0.5;
    const Path lane = (forward ? road : road.reversed()).offset(r.lane_center());
    const double v0 = rng.uniform(4.0, 12.0);
    // Start so the agent reaches the bend around the middle of its track.
    const double s0 = std::max(5.0, arc_mid - v0 * duration * rng.uniform(0.3, 0.7));
    sc.tracks.push_back(make_track("agent_" + std::to_string(a), lane,
                                   accelerating_profile(rng, s0, v0, duration), n, rng));
  }
  return sc;
}

enum class Maneuver { Straight, Left, Right };

Scenario intersection_scene(Rng& rng, std::size_t n_agents, std::size_t n) {
  const RoadProfile r = RoadProfile::sample(rng);
  const double heading = rng.uniform(-kPi, kPi);
  const Vec2 center{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
  const double arm = 100.0;
  const double hw = r.drivable / 2.0;

  Scenario sc;
  // Two crossing roads through the center, each running -arm .. +arm.
  std::vector<Path> roads;
  for (int k = 0; k < 2; ++k) {
    const double h = heading + k * kPi / 2.0;
    Path road({{center.x - arm * std::cos(h), center.y - arm * std::sin(h)}, h});
    road.line(2.0 * arm);
    add_roadway(sc.map, road, r, 0.0, road.length(), 40.0);
    // Walkways stop at the crossing road's walkway band.
    add_walkways(sc.map, road, r, 0.0, arm - r.walk_outer());
    add_walkways(sc.map, road, r, arm + r.walk_outer(), road.length());
    roads.push_back(road);
  }

  const double duration = track_duration(n);
  const double lane_off = r.lane / 2.0;
  for (std::size_t a = 0; a < n_agents; ++a) {
    // Approach from one of the four arms, in the local frame of that arm:
    // the center is the origin, travel along +x in the lane at y = -lane_off.
    const double approach = heading + static_cast<double>(rng.below(4)) * kPi / 2.0;
    const double u = rng.uniform();
    const Maneuver m = u < 0.34 ? Maneuver::Straight : (u < 0.67 ? Maneuver::Left : Maneuver::Right);
    auto world = [&](double x, double y) {
      return Vec2{center.x + x * std::cos(approach) - y * std::sin(approach),
                  center.y + x * std::sin(approach) + y * std::cos(approach)};
    };
    double turn_start = 0.0, turn_length = 0.0;
    Path lane({world(-arm, -lane_off), approach});
    if (m == Maneuver::Straight) {
      lane.line(2.0 * arm);
      turn_start = arm;
    } else if (m == Maneuver::Right) {
      // Tangent arc from y = -lane_off (heading +x) to x = -lane_off (heading -y).
      const double radius = rng.uniform(std::max(3.0, hw - lane_off), hw + 2.0);
      const double xs = -lane_off - radius;
      turn_start = xs + arm;
      turn_length = radius * kPi / 2.0;
      lane.line(turn_start).arc(radius, -kPi / 2.0).line(arm - radius - lane_off);
    } else {
      // Tangent arc from y = -lane_off (heading +x) to x = +lane_off (heading +y).
      const double radius = rng.uniform(hw + lane_off, hw + lane_off + 4.0);
      const double xs = lane_off - radius;
      turn_start = xs + arm;
      turn_length = radius * kPi / 2.0;
      lane.line(turn_start).arc(radius, kPi / 2.0).line(arm - radius + lane_off);
    }
    if (m != Maneuver::Straight) {
      // Connector lane through the junction box.
      sc.map.polygons(SemanticLayer::Lane).push_back(
          strip(lane, turn_start - 1.0, turn_start + turn_length + 1.0, -r.lane / 2.0, r.lane / 2.0));
    }
    const double v0 = rng.uniform(4.0, 10.0);
    const double s0 = std::max(5.0, turn_start - v0 * duration * rng.uniform(0.3, 0.7));
    sc.tracks.push_back(make_track("agent_" + std::to_string(a), lane,
                                   accelerating_profile(rng, s0, v0, duration), n, rng));
  }
  return sc;
}

}  // namespace

std::string_view kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Straight: return "straight";
    case ScenarioKind::Curve: return "curve";
    case ScenarioKind::Intersection: return "intersection";
  }
  return "unknown";
}

ScenarioKind parse_kind(std::string_view name) {
  if (name == "straight") return ScenarioKind::Straight;
  if (name == "curve") return ScenarioKind::Curve;
  if (name == "intersection") return ScenarioKind::Intersection;
  throw std::invalid_argument("unknown scenario kind \"" + std::string(name) +
                              "\" (expected straight, curve or intersection)");
}

Scenario generate_scenario(std::uint64_t seed, ScenarioKind kind, std::size_t n_agents,
                           const GeneratorOptions& options) {
  if (options.states_per_track < 3) throw std::invalid_argument("states_per_track must be at least 3");
  Rng rng(seed);
  Scenario sc;
  switch (kind) {
    case ScenarioKind::Straight: sc = straight_scene(rng, n_agents, options.states_per_track); break;
    case ScenarioKind::Curve: sc = curve_scene(rng, n_agents, options.states_per_track); break;
    case ScenarioKind::Intersection: sc = intersection_scene(rng, n_agents, options.states_per_track); break;
  }
  sc.validate();
  return sc;
}

}  // namespace capnet
