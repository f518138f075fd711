#include "fbench/environment.hpp"

#include <cmath>

namespace fb {

namespace {

double wrap_angle(double x) {
  constexpr double lo = -Acrobot::pi;
  constexpr double hi = Acrobot::pi;
  constexpr double span = hi - lo;
  while (x > hi) x -= span;
  while (x < lo) x += span;
  return x;
}

void check_action(int action, int count) {
  if (action < 0 || action >= count)
    throw UsageError("action " + std::to_string(action) + " outside [0, " + std::to_string(count) + ")");
}

}  // namespace

std::string to_string(EnvId id) {
  return id == EnvId::mountain_car ? "mountain_car" : "acrobot";
}

EnvId env_id_from_string(const std::string& name) {
  if (name == "mountain_car") return EnvId::mountain_car;
  if (name == "acrobot") return EnvId::acrobot;
  throw ConfigError("unknown environment '" + name + "'");
}

MountainCarState MountainCar::reset(Rng& rng) const {
  std::uniform_real_distribution<double> start(-0.6, 0.4);
  return State{start(rng), 0.0};
}

StepResult<MountainCarState> MountainCar::step(const State& s, int action) const {
  check_action(action, action_count);
  const double thrust = literal_ ? 0.001 * action : 0.001 * (action - 1);
  double v = std::clamp(s.velocity + thrust - 0.0025 * std::cos(3.0 * s.position), -max_speed, max_speed);
  double p = std::clamp(s.position + v, min_position, max_position);
  if (p <= min_position) {
    p = min_position;
    v = 0.0;
  }
  const State next{p, v};
  return {next, -1.0, is_terminal(next)};
}

int MountainCar::policy(const State& s) {
  if (s.velocity > 0.0) return 2;
  if (s.velocity < 0.0) return 0;
  return 1;
}

Eigen::VectorXd MountainCar::observe(const State& s) {
  Eigen::VectorXd x(2);
  x << (s.position - min_position) / (max_position - min_position),
      (s.velocity + max_speed) / (2.0 * max_speed);
  return x;
}

AcrobotState Acrobot::reset(Rng& rng) const {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  State s;
  s.theta1 = u(rng);
  s.theta2 = u(rng);
  s.dtheta1 = u(rng);
  s.dtheta2 = u(rng);
  return s;
}

std::array<double, 4> Acrobot::derivatives(const std::array<double, 4>& s, double torque) {
  constexpr double m1 = link_mass, m2 = link_mass;
  constexpr double l1 = link_length;
  constexpr double lc1 = link_com, lc2 = link_com;
  constexpr double i1 = link_moi, i2 = link_moi;
  constexpr double g = gravity;
  const double theta1 = s[0], theta2 = s[1], dtheta1 = s[2], dtheta2 = s[3];

  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(theta2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(theta1 + theta2 - pi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                      2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(theta1 - pi / 2.0) + phi2;
  const double ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
                          (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

StepResult<AcrobotState> Acrobot::step(const State& s, int action) const {
  check_action(action, action_count);
  const double torque = static_cast<double>(action - 1);
  const std::array<double, 4> y0{s.theta1, s.theta2, s.dtheta1, s.dtheta2};

  // One classical fourth-order Runge-Kutta step over [0, dt].
  auto axpy = [](const std::array<double, 4>& y, double h, const std::array<double, 4>& k) {
    return std::array<double, 4>{y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]};
  };
  const auto k1 = derivatives(y0, torque);
  const auto k2 = derivatives(axpy(y0, dt / 2.0, k1), torque);
  const auto k3 = derivatives(axpy(y0, dt / 2.0, k2), torque);
  const auto k4 = derivatives(axpy(y0, dt, k3), torque);
  std::array<double, 4> y;
  for (std::size_t i = 0; i < 4; ++i) y[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

  State next;
  next.theta1 = wrap_angle(y[0]);
  next.theta2 = wrap_angle(y[1]);
  next.dtheta1 = std::clamp(y[2], -max_vel_1, max_vel_1);
  next.dtheta2 = std::clamp(y[3], -max_vel_2, max_vel_2);
  return {next, -1.0, is_terminal(next)};
}

// Torque opposes the first link's swing. Pushing along it never builds
// enough energy to reach the goal height under these dynamics.
int Acrobot::policy(const State& s) {
  if (s.dtheta1 == 0.0 || std::abs(s.dtheta2) >= 10.0 * std::abs(s.dtheta1)) return 1;
  return s.dtheta1 > 0.0 ? 0 : 2;
}

bool Acrobot::is_terminal(const State& s) {
  return -std::cos(s.theta1) - std::cos(s.theta2 + s.theta1) > 1.0;
}

Eigen::VectorXd Acrobot::observe(const State& s) {
  Eigen::VectorXd x(6);
  x << std::cos(s.theta1), std::sin(s.theta1), std::cos(s.theta2), std::sin(s.theta2),
      s.dtheta1 / max_vel_1, s.dtheta2 / max_vel_2;
  return x;
}

std::vector<MountainCarState> mountain_car_probe_states() {
  constexpr int cells = 6;
  constexpr double p_lo = MountainCar::min_position, p_hi = MountainCar::goal_position;
  constexpr double v_lo = -MountainCar::max_speed, v_hi = MountainCar::max_speed;
  std::vector<MountainCarState> out;
  out.reserve(cells * cells);
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      out.push_back({p_lo + (i + 0.5) * (p_hi - p_lo) / cells, v_lo + (j + 0.5) * (v_hi - v_lo) / cells});
  return out;
}

std::vector<AcrobotState> acrobot_probe_states(std::uint64_t master_seed) {
  Rng rng = make_rng(master_seed, Stream::probe_states);
  std::uniform_real_distribution<double> angle(-Acrobot::pi, Acrobot::pi);
  std::uniform_real_distribution<double> vel1(-Acrobot::max_vel_1, Acrobot::max_vel_1);
  std::uniform_real_distribution<double> vel2(-Acrobot::max_vel_2, Acrobot::max_vel_2);
  std::vector<AcrobotState> out(180);
  for (auto& s : out) {
    s.theta1 = angle(rng);
    s.theta2 = angle(rng);
    s.dtheta1 = vel1(rng);
    s.dtheta2 = vel2(rng);
  }
  return out;
}

}  // namespace fb
