#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

namespace nsslab::pendulum {

/// Row-major side x side grayscale image in [0, 1], flattened to side^2.
/// Rod from the image center to the bob at center + 0.8 (side/2)
/// (sin theta, cos theta), x to the right and y down, so theta = 0 hangs
/// straight down. Bob is a disc of radius side/12. Edges are anti-aliased
/// by a one-pixel linear ramp.
Eigen::VectorXd render_frame(double theta, int side = 24);

/// Binary PGM (P5, maxval 255).
std::string to_pgm(const Eigen::VectorXd& frame, int side);

}  // namespace nsslab::pendulum
