#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "silan/data.hpp"
#include "silan/nn.hpp"

namespace silan {

namespace detail {

inline std::string svg_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

// Decision map over the data's bounding box (10% margin per side) as a
// grid_res x grid_res cell raster colored by predicted class, with the samples
// overlaid colored by true label. Output bytes are deterministic for fixed
// inputs.
inline std::string render_decision_svg(const MlpModel& model, const LabeledDataset& ds,
                                       std::size_t grid_res) {
  if (ds.dim() != 2) throw std::invalid_argument("render_decision_svg: 2-d data only");
  if (model.spec.input_dim() != 2) {
    throw std::invalid_argument("render_decision_svg: model must take 2-d input");
  }
  if (grid_res < 1) throw std::invalid_argument("render_decision_svg: grid_res must be >= 1");
  if (ds.size() == 0) throw std::invalid_argument("render_decision_svg: empty dataset");

  double xlo = ds.X(0, 0), xhi = xlo, ylo = ds.X(0, 1), yhi = ylo;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    xlo = std::min(xlo, ds.X(i, 0));
    xhi = std::max(xhi, ds.X(i, 0));
    ylo = std::min(ylo, ds.X(i, 1));
    yhi = std::max(yhi, ds.X(i, 1));
  }
  const double xpad = xhi > xlo ? 0.1 * (xhi - xlo) : 1.0;
  const double ypad = yhi > ylo ? 0.1 * (yhi - ylo) : 1.0;
  xlo -= xpad;
  xhi += xpad;
  ylo -= ypad;
  yhi += ypad;

  constexpr double kCanvas = 640.0;
  const auto sx = [&](double v) { return (v - xlo) / (xhi - xlo) * kCanvas; };
  const auto sy = [&](double v) { return kCanvas - (v - ylo) / (yhi - ylo) * kCanvas; };

  static constexpr const char* kCellFill[] = {"#c6dbef", "#fdd0a2", "#c7e9c0",
                                              "#dadaeb", "#f7c6c7", "#e0e0e0"};
  static constexpr const char* kPointFill[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                               "#9467bd", "#d62728", "#4d4d4d"};
  constexpr std::size_t kPalette = 6;

  // classify all cell centers in one pass
  DenseMatrix centers(grid_res * grid_res, 2);
  const double cw = (xhi - xlo) / static_cast<double>(grid_res);
  const double ch = (yhi - ylo) / static_cast<double>(grid_res);
  for (std::size_t gy = 0; gy < grid_res; ++gy) {
    for (std::size_t gx = 0; gx < grid_res; ++gx) {
      const std::size_t r = gy * grid_res + gx;
      centers(r, 0) = xlo + (static_cast<double>(gx) + 0.5) * cw;
      centers(r, 1) = ylo + (static_cast<double>(gy) + 0.5) * ch;
    }
  }
  const DenseMatrix cell_logits = forward(model, centers).logits;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
         "viewBox=\"0 0 640 640\">\n";
  const double cell_px = kCanvas / static_cast<double>(grid_res);
  for (std::size_t gy = 0; gy < grid_res; ++gy) {
    for (std::size_t gx = 0; gx < grid_res; ++gx) {
      const std::size_t cls = argmax(cell_logits.row(gy * grid_res + gx));
      // svg y runs downward; row gy covers data band [ylo + gy*ch, +ch)
      const double px = static_cast<double>(gx) * cell_px;
      const double py = kCanvas - static_cast<double>(gy + 1) * cell_px;
      svg += "<rect x=\"" + detail::svg_num(px) + "\" y=\"" + detail::svg_num(py) +
             "\" width=\"" + detail::svg_num(cell_px) + "\" height=\"" + detail::svg_num(cell_px) +
             "\" fill=\"" + kCellFill[cls % kPalette] + "\"/>\n";
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    svg += "<circle cx=\"" + detail::svg_num(sx(ds.X(i, 0))) + "\" cy=\"" +
           detail::svg_num(sy(ds.X(i, 1))) + "\" r=\"3\" fill=\"" +
           kPointFill[static_cast<std::size_t>(ds.labels[i]) % kPalette] + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline void save_decision_svg(const MlpModel& model, const LabeledDataset& ds,
                              std::size_t grid_res, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << render_decision_svg(model, ds, grid_res);
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace silan
