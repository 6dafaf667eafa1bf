#include "nsslab/pendulum/render.hpp"

#include <algorithm>
#include <cmath>

#include "nsslab/errors.hpp"

namespace nsslab::pendulum {

namespace {

double coverage(double distance, double radius) { return std::clamp(radius + 0.5 - distance, 0.0, 1.0); }

}  // namespace

Eigen::VectorXd render_frame(double theta, int side) {
  if (side < 4) throw ContractError("render_frame: side must be >= 4");
  const double c = 0.5 * side;
  const double reach = 0.8 * c;
  const double bx = reach * std::sin(theta);
  const double by = reach * std::cos(theta);
  const double bob_radius = side / 12.0;
  constexpr double kRodHalfWidth = 0.5;
  const double len2 = bx * bx + by * by;
  Eigen::VectorXd img(side * side);
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const double px = col + 0.5 - c;
      const double py = r + 0.5 - c;
      const double t = std::clamp((px * bx + py * by) / len2, 0.0, 1.0);
      const double rx = px - t * bx, ry = py - t * by;
      const double rod = coverage(std::sqrt(rx * rx + ry * ry), kRodHalfWidth);
      const double dx = px - bx, dy = py - by;
      const double bob = coverage(std::sqrt(dx * dx + dy * dy), bob_radius);
      img[r * side + col] = std::max(rod, bob);
    }
  }
  return img;
}

std::string to_pgm(const Eigen::VectorXd& frame, int side) {
  if (frame.size() != static_cast<Eigen::Index>(side) * side) throw ShapeError("to_pgm: frame size");
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (Eigen::Index i = 0; i < frame.size(); ++i)
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(frame[i], 0.0, 1.0) * 255.0))));
  return out;
}

}  // namespace nsslab::pendulum
