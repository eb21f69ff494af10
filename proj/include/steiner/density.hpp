#pragma once

// Per-triangle scalar densities shared by both solvers, with the cell
// averaging used for images.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace steiner {

struct DensityField {
  std::vector<double> theta;              // per triangle
  std::vector<std::vector<double>> flux;  // [component][triangle]
  double area = 0.0;                      // of one triangle
  double cost = 0.0;                      // sum_t theta_t * area
  double bracket = 0.0;                   // convex solver: sum_t area * envelope bracket width

  // Mean of the two triangles of every cell, row-major with y increasing.
  std::vector<double> cell_values(int S) const {
    std::vector<double> out(static_cast<std::size_t>(S) * S, 0.0);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = 0.5 * (theta[2 * c] + theta[2 * c + 1]);
    return out;
  }

  // Grayscale in [0, 255] normalized by the largest cell value; rows run
  // from the top of the domain down.
  std::vector<std::uint8_t> grayscale(int S) const {
    const auto cells = cell_values(S);
    const double top = *std::max_element(cells.begin(), cells.end());
    std::vector<std::uint8_t> out(cells.size(), 0);
    if (top <= 0.0) return out;
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < S; ++c) {
        const double v = cells[static_cast<std::size_t>(S - 1 - r) * S + c] / top;
        out[static_cast<std::size_t>(r) * S + c] = static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
    return out;
  }
};

}  // namespace steiner
