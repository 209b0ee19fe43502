#include "ftlwave/interpolant.hpp"

#include <algorithm>
#include <cmath>

#include "ftlwave/errors.hpp"

namespace ftlwave {

namespace {

// Three-point one-sided slope with the usual monotonicity clamp.
double edge_slope(double h0, double h1, double s0, double s1) {
  double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
  if (d * s0 <= 0.0) {
    d = 0.0;
  } else if (s0 * s1 < 0.0 && std::abs(d) > 3.0 * std::abs(s0)) {
    d = 3.0 * s0;
  }
  return d;
}

}  // namespace

void CubicInterpolant::segment_slopes(const double* x, const double* y, std::size_t n,
                                      double* d) {
  if (n == 1) {
    d[0] = 0.0;
    return;
  }
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    const double s0 = (y[i] - y[i - 1]) / h0;
    const double s1 = (y[i + 1] - y[i]) / h1;
    if (s0 * s1 <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w0 = 2.0 * h1 + h0;
      const double w1 = h1 + 2.0 * h0;
      d[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
    }
  }
  {
    const double h0 = x[1] - x[0];
    const double h1 = x[2] - x[1];
    const double s0 = (y[1] - y[0]) / h0;
    const double s1 = (y[2] - y[1]) / h1;
    d[0] = edge_slope(h0, h1, s0, s1);
  }
  {
    const double h0 = x[n - 1] - x[n - 2];
    const double h1 = x[n - 2] - x[n - 3];
    const double s0 = (y[n - 1] - y[n - 2]) / h0;
    const double s1 = (y[n - 2] - y[n - 3]) / h1;
    d[n - 1] = edge_slope(h0, h1, s0, s1);
  }
}

CubicInterpolant::CubicInterpolant(std::vector<double> x, std::vector<double> y,
                                   std::vector<std::size_t> kink_indices)
    : x_(std::move(x)), y_(std::move(y)), kinks_(std::move(kink_indices)) {
  if (x_.size() != y_.size() || x_.empty()) {
    throw DomainError("interpolant: grid/value size mismatch or empty grid");
  }
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) {
      throw DomainError("interpolant: grid must be strictly increasing");
    }
  }
  std::sort(kinks_.begin(), kinks_.end());
  kinks_.erase(std::unique(kinks_.begin(), kinks_.end()), kinks_.end());
  while (!kinks_.empty() && kinks_.front() == 0) kinks_.erase(kinks_.begin());
  while (!kinks_.empty() && kinks_.back() >= x_.size() - 1) kinks_.pop_back();

  // Node slopes segment by segment.  dr_[i] is the slope seen from the cell to
  // the right of node i, dl_[i] the one seen from the left; they differ only
  // at kink nodes, where each side gets its own one-sided estimate.
  dr_.assign(x_.size(), 0.0);
  dl_.assign(x_.size(), 0.0);
  std::vector<double> tmp;
  auto run = [&](std::size_t first, std::size_t last) {  // inclusive
    const std::size_t n = last - first + 1;
    tmp.assign(n, 0.0);
    segment_slopes(x_.data() + first, y_.data() + first, n, tmp.data());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = first + i;
      dr_[g] = tmp[i];  // at a shared kink node the next run overwrites this
      if (i > 0 || first == 0) dl_[g] = tmp[i];
    }
  };
  std::size_t begin = 0;
  for (std::size_t k : kinks_) {
    run(begin, k);
    begin = k;
  }
  run(begin, x_.size() - 1);
}

std::size_t CubicInterpolant::cell_of(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t idx = static_cast<std::size_t>(it - x_.begin());
  if (idx == 0) return 0;
  if (idx >= x_.size()) return x_.size() - 2;
  return idx - 1;
}

double CubicInterpolant::operator()(double x) const {
  if (x <= x_.front()) return y_.front();
  if (x >= x_.back()) return y_.back();
  const std::size_t i = cell_of(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double dl = dr_[i];      // left node of the cell: right-sided slope
  const double dr = dl_[i + 1];  // right node: left-sided slope
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * y_[i] + h10 * h * dl + h01 * y_[i + 1] + h11 * h * dr;
}

double CubicInterpolant::derivative_in_cell(std::size_t i, double x) const {
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double dl = dr_[i];
  const double dr = dl_[i + 1];
  const double dh00 = (6.0 * t * t - 6.0 * t) / h;
  const double dh10 = 3.0 * t * t - 4.0 * t + 1.0;
  const double dh01 = (-6.0 * t * t + 6.0 * t) / h;
  const double dh11 = 3.0 * t * t - 2.0 * t;
  return dh00 * y_[i] + dh10 * dl + dh01 * y_[i + 1] + dh11 * dr;
}

double CubicInterpolant::derivative(double x) const { return derivative_right(x); }

double CubicInterpolant::derivative_right(double x) const {
  if (x_.size() == 1) return 0.0;
  if (x < x_.front() || x >= x_.back()) return 0.0;  // constant extension
  auto it = std::lower_bound(x_.begin(), x_.end(), x);
  if (it != x_.end() && *it == x) {
    return dr_[static_cast<std::size_t>(it - x_.begin())];
  }
  return derivative_in_cell(cell_of(x), x);
}

double CubicInterpolant::derivative_left(double x) const {
  if (x_.size() == 1) return 0.0;
  if (x <= x_.front() || x > x_.back()) return 0.0;  // constant extension
  auto it = std::lower_bound(x_.begin(), x_.end(), x);
  if (it != x_.end() && *it == x) {
    return dl_[static_cast<std::size_t>(it - x_.begin())];
  }
  return derivative_in_cell(cell_of(x), x);
}

}  // namespace ftlwave
