#include <cmath>
#include <numbers>

#include "capnet/metrics.hpp"

namespace capnet {

std::string physics_model_name(PhysicsModel m) {
  switch (m) {
    case PhysicsModel::ConstVelocity: return "CV&H";
    case PhysicsModel::ConstAcceleration: return "CA&H";
    case PhysicsModel::ConstTurnRateVelocity: return "CTRV";
    case PhysicsModel::ConstTurnRateAcceleration: return "CTRA";
  }
  return "?";
}

double turn_rate(const AgentState& prev, const AgentState& last) {
  double d = last.yaw - prev.yaw;
  d = std::remainder(d, 2.0 * std::numbers::pi);
  if (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
  return d / kStepSeconds;
}

Trajectory baseline_cvh(const AgentState& last, std::size_t tau) {
  Trajectory out(2 * tau);
  for (std::size_t j = 1; j <= tau; ++j) {
    const double t = static_cast<double>(j) * kStepSeconds;
    out[2 * (j - 1)] = t * last.vx;
    out[2 * (j - 1) + 1] = t * last.vy;
  }
  return out;
}

namespace {

// Position along a path with heading theta0 + omega t and speed
// max(0, v + a t), integrated with Simpson's rule on fine substeps.
Vec2 integrate_ctra(double v, double a, double theta0, double omega, double t_end) {
  constexpr int kSub = 64;  // per 0.5 s, even
  const int n = kSub * std::max(1, static_cast<int>(std::lround(t_end / kStepSeconds)));
  const double h = t_end / n;
  auto f = [&](double t) {
    const double s = std::max(0.0, v + a * t);
    const double th = theta0 + omega * t;
    return Vec2{s * std::cos(th), s * std::sin(th)};
  };
  Vec2 acc{0.0, 0.0};
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const Vec2 p = f(k * h);
    acc.x += w * p.x;
    acc.y += w * p.y;
  }
  return {acc.x * h / 3.0, acc.y * h / 3.0};
}

}  // namespace

Trajectory rollout(PhysicsModel model, const AgentState& prev, const AgentState& last, std::size_t tau) {
  if (model == PhysicsModel::ConstVelocity) return baseline_cvh(last, tau);
  const double speed = std::hypot(last.vx, last.vy);
  const double theta = last.yaw;
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double a_lon = last.ax * ux + last.ay * uy;
  const double omega = turn_rate(prev, last);
  Trajectory out(2 * tau);
  for (std::size_t j = 1; j <= tau; ++j) {
    const double t = static_cast<double>(j) * kStepSeconds;
    Vec2 p;
    switch (model) {
      case PhysicsModel::ConstAcceleration: {
        // Stops rather than reversing once the speed reaches zero.
        const double t_stop = a_lon < 0.0 ? speed / -a_lon : t;
        const double te = std::min(t, t_stop);
        const double s = speed * te + 0.5 * a_lon * te * te;
        p = {s * ux, s * uy};
        break;
      }
      case PhysicsModel::ConstTurnRateVelocity:
        if (std::abs(omega) < 1e-9) {
          p = {speed * t * ux, speed * t * uy};
        } else {
          const double r = speed / omega;
          p = {r * (std::sin(theta + omega * t) - std::sin(theta)),
               r * (std::cos(theta) - std::cos(theta + omega * t))};
        }
        break;
      case PhysicsModel::ConstTurnRateAcceleration:
        p = integrate_ctra(speed, a_lon, theta, omega, t);
        break;
      case PhysicsModel::ConstVelocity:
        break;
    }
    out[2 * (j - 1)] = p.x;
    out[2 * (j - 1) + 1] = p.y;
  }
  return out;
}

Trajectory physics_oracle(const AgentState& prev, const AgentState& last, std::size_t tau,
                          std::span<const double> truth, std::span<const PhysicsModel> members) {
  if (members.empty()) throw std::invalid_argument("physics_oracle: no member models");
  if (truth.size() != 2 * tau) throw std::invalid_argument("physics_oracle: ground truth does not have tau steps");
  Trajectory best;
  double best_err = 0.0;
  for (PhysicsModel m : members) {
    auto r = rollout(m, prev, last, tau);
    const double err = ade_all(r, truth);
    if (best.empty() || err < best_err) {
      best = std::move(r);
      best_err = err;
    }
  }
  return best;
}

}  // namespace capnet
