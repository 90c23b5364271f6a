#pragma once
#include <string>
#include <vector>

namespace mgpo {

struct PlotSeries {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Minimal static SVG: axes, tick labels, one polyline per series, legend.
void write_loss_svg(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series);

}  // namespace mgpo
