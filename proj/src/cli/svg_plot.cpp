#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace confex::cli {

namespace {

constexpr double kWidth = 860.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 78.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 58.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

double nice_step(double range) {
  double raw = range / 6.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void marker(std::ostringstream& os, const Frame& f, double x, double y, char shape, bool filled) {
  const double cx = f.px(x), cy = f.py(y), r = 4.0;
  const std::string paint = filled ? "fill=\"black\" stroke=\"black\"" : "fill=\"white\" stroke=\"black\"";
  if (shape == 'o') {
    os << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r) << "\" " << paint << "/>\n";
    return;
  }
  const double dir = shape == '^' ? -1.0 : 1.0;  // '^' upper endpoint, 'v' lower endpoint
  os << "<polygon points=\"" << fmt(cx - r) << ',' << fmt(cy - dir * r * 0.6) << ' ' << fmt(cx + r) << ','
     << fmt(cy - dir * r * 0.6) << ' ' << fmt(cx) << ',' << fmt(cy + dir * r) << "\" " << paint << "/>\n";
}

void polyline(std::ostringstream& os, const Frame& f, const SplineFit& s, double from, double to,
              const std::string& style) {
  os << "<polyline fill=\"none\" " << style << " points=\"";
  const int steps = static_cast<int>(std::ceil((to - from) * 4.0));
  for (int k = 0; k <= steps; ++k) {
    double x = from + (to - from) * k / steps;
    if (k) os << ' ';
    os << fmt(f.px(x)) << ',' << fmt(f.py(s(x)));
  }
  os << "\"/>\n";
}

}  // namespace

std::string render_trajectory_svg(const TrajectoryEnsemble& ensemble, const ExtrapolationResult& result,
                                  const std::string& title) {
  const auto& orbits = ensemble.observed.orbits;
  const int J = result.J;
  const int q_hi = result.q_values.empty() ? 0 : result.q_values.back();

  double lo = 0.0, hi = 0.0;
  auto widen = [&](double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const auto& o : orbits) {
    widen(o.ci_lower);
    widen(o.ci_upper);
  }
  for (std::size_t k = 0; k < result.q_values.size(); ++k) {
    widen(result.uncertainty_intervals[k].lower);
    widen(result.uncertainty_intervals[k].upper);
    widen(result.effect_spread[k].lower);
    widen(result.effect_spread[k].upper);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.08 * (hi - lo);
  Frame f{-0.5, J + q_hi + 0.5, lo - pad, hi + pad};

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<defs><clipPath id=\"plot-area\"><rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
     << fmt(kWidth - kLeft - kRight) << "\" height=\"" << fmt(kHeight - kTop - kBottom)
     << "\"/></clipPath></defs>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
     << "</text>\n";

  // Axes and grid.
  os << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
     << fmt(kWidth - kLeft - kRight) << "\" height=\"" << fmt(kHeight - kTop - kBottom) << "\"/></g>\n";
  const double step = nice_step(f.y1 - f.y0);
  os << "<g font-size=\"11\">\n";
  for (double y = std::ceil(f.y0 / step) * step; y <= f.y1; y += step) {
    os << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(f.py(y)) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
       << fmt(f.py(y)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 7) << "\" y=\"" << fmt(f.py(y) + 4) << "\" text-anchor=\"end\">"
       << fmt(std::abs(y) < step * 1e-9 ? 0.0 : y) << "</text>\n";
  }
  const int xstep = std::max(1, (J + q_hi) / 12);
  for (int x = 0; x <= J + q_hi; x += xstep) {
    os << "<line x1=\"" << fmt(f.px(x)) << "\" y1=\"" << fmt(kHeight - kBottom) << "\" x2=\"" << fmt(f.px(x))
       << "\" y2=\"" << fmt(kHeight - kBottom + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(f.px(x)) << "\" y=\"" << fmt(kHeight - kBottom + 17) << "\" text-anchor=\"middle\">"
       << x << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fmt(kHeight - 14)
     << "\" text-anchor=\"middle\">Number of covariates adjusted for</text>\n";
  os << "<text transform=\"translate(18," << fmt((kTop + kHeight - kBottom) / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">Exposure effect</text>\n";

  os << "<g clip-path=\"url(#plot-area)\">\n";
  os << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(f.py(0.0)) << "\" x2=\"" << fmt(kWidth - kRight)
     << "\" y2=\"" << fmt(f.py(0.0)) << "\" stroke=\"#777777\" stroke-dasharray=\"4,3\"/>\n";
  os << "<line x1=\"" << fmt(f.px(J)) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(f.px(J)) << "\" y2=\""
     << fmt(kHeight - kBottom) << "\" stroke=\"#bbbbbb\"/>\n";
  for (std::size_t t = 1; t < result.fits.size(); ++t)
    polyline(os, f, result.fits[t].estimate, 0.0, J + q_hi, "stroke=\"#c8c8c8\" stroke-width=\"0.6\"");
  if (!result.fits.empty())
    polyline(os, f, result.fits[0].estimate, 0.0, J + q_hi, "stroke=\"black\" stroke-width=\"1.4\"");
  for (std::size_t k = 0; k < result.q_values.size(); ++k) {
    const double x = J + result.q_values[k];
    os << "<line x1=\"" << fmt(f.px(x)) << "\" y1=\"" << fmt(f.py(result.effect_spread[k].lower)) << "\" x2=\""
       << fmt(f.px(x)) << "\" y2=\"" << fmt(f.py(result.effect_spread[k].upper))
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  }
  for (std::size_t j = 0; j < orbits.size(); ++j) {
    const double x = static_cast<double>(j);
    marker(os, f, x, orbits[j].ci_upper, '^', false);
    marker(os, f, x, orbits[j].ci_lower, 'v', false);
    marker(os, f, x, orbits[j].estimate, 'o', false);
  }
  for (std::size_t k = 0; k < result.q_values.size(); ++k) {
    const double x = J + result.q_values[k];
    marker(os, f, x, result.uncertainty_intervals[k].upper, '^', true);
    marker(os, f, x, result.uncertainty_intervals[k].lower, 'v', true);
    marker(os, f, x, result.predicted_effects(0, static_cast<Index>(k)), 'o', true);
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace confex::cli
