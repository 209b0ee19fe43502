#pragma once

#include <cstddef>
#include <vector>

namespace ftlwave {

/// Shape-preserving piecewise-cubic interpolant (Fritsch-Carlson slopes) over a
/// strictly increasing grid.  Selected nodes may be marked as kinks: slope
/// estimation never reaches across a kink, so derivative jumps survive
/// interpolation instead of being smeared over neighbouring cells.
/// Evaluation outside the grid extends the boundary values as constants.
class CubicInterpolant {
 public:
  CubicInterpolant() = default;
  CubicInterpolant(std::vector<double> x, std::vector<double> y,
                   std::vector<std::size_t> kink_indices = {});

  double operator()(double x) const;

  /// Derivative of the cubic piece containing x (right-biased at nodes).
  double derivative(double x) const;
  /// One-sided derivatives; they differ only at kink nodes.
  double derivative_left(double x) const;
  double derivative_right(double x) const;

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<std::size_t>& kink_indices() const { return kinks_; }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  std::size_t size() const { return x_.size(); }
  bool empty() const { return x_.empty(); }

  /// Fritsch-Carlson node slopes for a smooth run of nodes [first, last).
  /// Exposed so that incremental marchers reproduce the exact same values.
  static void segment_slopes(const double* x, const double* y, std::size_t n, double* d);

 private:
  std::size_t cell_of(double x) const;
  double derivative_in_cell(std::size_t i, double x) const;

  std::vector<double> x_, y_;
  std::vector<double> dr_, dl_;     // node slopes seen from the right/left cell
  std::vector<std::size_t> kinks_;  // sorted, interior segment breaks
};

}  // namespace ftlwave
