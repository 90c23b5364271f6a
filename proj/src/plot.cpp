#include "mgpo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mgpo/errors.hpp"

namespace mgpo {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = 0.0, hi = 1.0;
  double map(double v, double out_lo, double out_hi) const {
    const double t = (v - lo) / (hi - lo);
    return out_lo + t * (out_hi - out_lo);
  }
};

Range find_range(const std::vector<PlotSeries>& series, bool x_axis) {
  double lo = 1e300, hi = -1e300;
  for (const PlotSeries& s : series) {
    for (double v : x_axis ? s.xs : s.ys) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

}  // namespace

void write_loss_svg(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series) {
  if (series.empty()) throw UsageError("write_loss_svg: no series");
  const double width = 720, height = 440;
  const double ml = 70, mr = 20, mt = 40, mb = 50;  // margins
  const Range xr = find_range(series, true);
  const Range yr = find_range(series, false);

  std::ofstream out(path);
  if (!out) throw UsageError("write_loss_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double px = xr.map(fx, ml, width - mr);
    out << "<text x=\"" << px << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fx << "</text>\n";
    const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    const double py = yr.map(fy, height - mb, mt);
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fy << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << (mt + height - mb) / 2
      << ")\" text-anchor=\"middle\">loss</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.ys[i])) continue;
      out << xr.map(s.xs[i], ml, width - mr) << "," << yr.map(s.ys[i], height - mb, mt) << " ";
    }
    out << "\"/>\n";
    const double ly = mt + 16.0 * static_cast<double>(si);
    out << "<line x1=\"" << width - mr - 140 << "\" y1=\"" << ly << "\" x2=\""
        << width - mr - 116 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - mr - 110 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace mgpo
