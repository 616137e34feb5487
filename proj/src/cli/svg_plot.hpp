#pragma once

#include "confex/extrapolation.hpp"

#include <string>

namespace confex::cli {

// Self-contained SVG of the observed trajectory (open markers), the spline
// through it, every perturbed spline (thin grey), and the extrapolated
// predictions (filled markers) with percentile whiskers.
std::string render_trajectory_svg(const TrajectoryEnsemble& ensemble, const ExtrapolationResult& result,
                                  const std::string& title);

}  // namespace confex::cli
