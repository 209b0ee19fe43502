#include "ftlwave/profile.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <future>
#include <limits>

#include "ftlwave/errors.hpp"

namespace ftlwave {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Quadrature: adaptive Simpson on a smooth piece.

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa,
                            double b, double fb, double m, double fm, double whole,
                            double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = simpson(a, fa, fm, b, fb);
  return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 40);
}

// Integrate over [a, b] splitting at the given breakpoints.
double integrate_with_breaks(const std::function<double(double)>& f, double a, double b,
                             std::vector<double> breaks, double tol) {
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  double lo = a;
  for (double c : breaks) {
    if (c > lo + 1e-15 && c < b - 1e-15) {
      total += adaptive_simpson(f, lo, c, tol);
      lo = c;
    }
  }
  total += adaptive_simpson(f, lo, b, tol);
  return total;
}

// ---------------------------------------------------------------------------
// Growing backward solution: nodes appended on the left, shape-preserving
// cubic evaluation with one-sided slopes at break nodes, and a caller-supplied
// tail for positions right of the stored range.

class BackwardStore {
 public:
  BackwardStore(std::function<double(double)> right_tail, double x0, double q0,
                bool seed_is_break)
      : right_tail_(std::move(right_tail)) {
    xs_.push_front(x0);
    qs_.push_front(q0);
    if (seed_is_break) breaks_.push_back(x0);
  }

  void push(double x, double q, bool is_break) {
    xs_.push_front(x);
    qs_.push_front(q);
    if (is_break) breaks_.insert(breaks_.begin(), x);
  }

  double frontier_x() const { return xs_.front(); }
  double frontier_q() const { return qs_.front(); }
  std::size_t size() const { return xs_.size(); }
  double node_x(std::size_t i) const { return xs_[i]; }
  double node_q(std::size_t i) const { return qs_[i]; }
  const std::vector<double>& breaks() const { return breaks_; }

  double eval(double x) const {
    if (x > xs_.back()) return right_tail_(x);
    if (x == xs_.back()) return qs_.back();
    if (x < xs_.front()) {
      throw StepRejected("delayed read left of the computed frontier");
    }
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t j = static_cast<std::size_t>(it - xs_.begin());
    if (j == 0) return qs_.front();
    --j;  // cell [j, j+1]
    const double h = xs_[j + 1] - xs_[j];
    const double t = (x - xs_[j]) / h;
    const double dl = slope_right_view(j);
    const double dr = slope_left_view(j + 1);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * qs_[j] + (t3 - 2.0 * t2 + t) * h * dl +
           (-2.0 * t3 + 3.0 * t2) * qs_[j + 1] + (t3 - t2) * h * dr;
  }

 private:
  bool is_break(std::size_t i) const {
    return std::binary_search(breaks_.begin(), breaks_.end(), xs_[i]);
  }

  static double secant(double x0, double y0, double x1, double y1) {
    return (y1 - y0) / (x1 - x0);
  }

  static double fc_interior(double h0, double h1, double s0, double s1) {
    if (s0 * s1 <= 0.0) return 0.0;
    const double w0 = 2.0 * h1 + h0;
    const double w1 = h1 + 2.0 * h0;
    return (w0 + w1) / (w0 / s0 + w1 / s1);
  }

  static double fc_edge(double h0, double h1, double s0, double s1) {
    double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (d * s0 <= 0.0) {
      d = 0.0;
    } else if (s0 * s1 < 0.0 && std::abs(d) > 3.0 * std::abs(s0)) {
      d = 3.0 * s0;
    }
    return d;
  }

  // Slope at node i as seen from the cell on its right.
  double slope_right_view(std::size_t i) const {
    const std::size_t n = xs_.size();
    if (i + 1 >= n) return 0.0;
    const double h1 = xs_[i + 1] - xs_[i];
    const double s1 = secant(xs_[i], qs_[i], xs_[i + 1], qs_[i + 1]);
    if (i > 0 && !is_break(i)) {
      const double h0 = xs_[i] - xs_[i - 1];
      const double s0 = secant(xs_[i - 1], qs_[i - 1], xs_[i], qs_[i]);
      return fc_interior(h0, h1, s0, s1);
    }
    if (i + 2 < n && !is_break(i + 1)) {
      const double h2 = xs_[i + 2] - xs_[i + 1];
      const double s2 = secant(xs_[i + 1], qs_[i + 1], xs_[i + 2], qs_[i + 2]);
      return fc_edge(h1, h2, s1, s2);
    }
    return s1;
  }

  // Slope at node i as seen from the cell on its left.
  double slope_left_view(std::size_t i) const {
    const std::size_t n = xs_.size();
    if (i == 0) return 0.0;
    const double h0 = xs_[i] - xs_[i - 1];
    const double s0 = secant(xs_[i - 1], qs_[i - 1], xs_[i], qs_[i]);
    if (i + 1 < n && !is_break(i)) {
      const double h1 = xs_[i + 1] - xs_[i];
      const double s1 = secant(xs_[i], qs_[i], xs_[i + 1], qs_[i + 1]);
      return fc_interior(h0, h1, s0, s1);
    }
    if (i >= 2 && !is_break(i - 1)) {
      const double hm = xs_[i - 1] - xs_[i - 2];
      const double sm = secant(xs_[i - 2], qs_[i - 2], xs_[i - 1], qs_[i - 1]);
      return fc_edge(h0, hm, s0, sm);
    }
    return s0;
  }

  std::deque<double> xs_, qs_;   // ascending
  std::vector<double> breaks_;   // ascending x positions
  std::function<double(double)> right_tail_;
};

// ---------------------------------------------------------------------------
// Right-hand side of the delayed equation.  Returns NaN when the state leaves
// the physically meaningful region, which the marcher treats as blow-up.

struct DddeRhs {
  const FluxModel& model;
  const BackwardStore& sol;
  double v_minus, v_plus, ell;

  double operator()(double x, double q) const {
    if (!(q > 1e-14) || !(q < 1.0 - 1e-14)) return kNan;
    const double xs = x + ell / q;
    const double qs = sol.eval(xs);
    const double phi = model.phi(q);
    if (!(phi > 0.0)) return kNan;
    const double phis = model.phi(qs);
    if (x <= 0.0 && xs > 0.0) {
      return q * q * (v_minus * phi - v_plus * phis) / (ell * v_minus * phi);
    }
    return q * q * (phi - phis) / (ell * phi);
  }
};

double rk4_backward(const DddeRhs& rhs, double x, double q, double sigma) {
  const double k1 = rhs(x, q);
  const double k2 = rhs(x - 0.5 * sigma, q - 0.5 * sigma * k1);
  const double k3 = rhs(x - 0.5 * sigma, q - 0.5 * sigma * k2);
  const double k4 = rhs(x - sigma, q - sigma * k3);
  return q - sigma / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<std::size_t> kink_indices_for(const std::vector<double>& grid,
                                          const std::vector<double>& kink_positions) {
  std::vector<std::size_t> idx;
  for (double k : kink_positions) {
    auto it = std::lower_bound(grid.begin(), grid.end(), k);
    if (it != grid.end() && *it == k) {
      idx.push_back(static_cast<std::size_t>(it - grid.begin()));
    }
  }
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------

Profile::Profile(std::vector<double> grid, std::vector<double> values, double ell,
                 double fbar, std::vector<std::size_t> kink_indices)
    : ell_(ell), fbar_(fbar) {
  if (grid.size() != values.size() || grid.size() < 2) {
    throw DomainError("profile: need at least two nodes");
  }
  min_value_ = values.front();
  max_value_ = values.front();
  for (double v : values) {
    if (!(v > 0.0 && v < 1.0)) {
      throw DomainError("profile: values must lie strictly inside (0, 1)");
    }
    min_value_ = std::min(min_value_, v);
    max_value_ = std::max(max_value_, v);
  }
  for (std::size_t k : kink_indices) {
    if (k < grid.size()) kink_x_.push_back(grid[k]);
  }
  std::sort(kink_x_.begin(), kink_x_.end());
  interp_ = CubicInterpolant(std::move(grid), std::move(values), std::move(kink_indices));
}

double leader_position(double x, double q, double ell) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("leader_position: density outside (0, 1)");
  if (!(ell > 0.0)) throw DomainError("leader_position: car length must be positive");
  return x + ell / q;
}

// ---------------------------------------------------------------------------
// W profile: backward march from a seed just below the right asymptote.

Profile solve_w_profile(const FluxModel& model, double v, double fbar, double ell,
                        const WOptions& opts) {
  const double rho_star = critical_density(model, v);
  const double fmax = model.flux(v, rho_star);
  if (!(fbar > 0.0) || fbar > fmax) {
    throw NoRootError("solve_w_profile: flux level outside (0, fmax]");
  }
  const auto [rho1, rho2] = fbar_roots(model, v, fbar);
  if (rho2 - rho1 < 1e-6) {
    throw DegenerateCaseError("solve_w_profile: flux level at the maximum, no transition");
  }

  const double h = ell * opts.h_over_ell;
  const double x_max = opts.span_spacings * ell / rho1;
  const double seed_q = rho2 - opts.seed_delta;

  BackwardStore store([rho2](double) { return rho2; }, x_max, seed_q,
                      /*seed_is_break=*/true);
  DddeRhs rhs{model, store, v, v, ell};

  double x = x_max;
  double q = seed_q;
  double crossed_at = kNan;
  const double tail_needed = opts.tail_spacings * ell / rho1;
  const double hard_floor = x_max - 4.0 * x_max - 10.0;  // extension cap
  while (true) {
    const double qn = rk4_backward(rhs, x, q, h);
    if (!std::isfinite(qn) || !(qn > 1e-12) || !(qn < 1.0 - 1e-12)) {
      throw SeedFailure("solve_w_profile: backward march left (0, 1)");
    }
    x -= h;
    q = qn;
    store.push(x, q, false);
    if (std::isnan(crossed_at) && q <= rho_star) crossed_at = x;
    if (!std::isnan(crossed_at) && crossed_at - x >= tail_needed) break;
    if (x < hard_floor) {
      throw SeedFailure("solve_w_profile: march failed to descend to the critical density");
    }
  }

  // Assemble nodes (ascending) plus a constant right tail, then re-shift so
  // that the profile passes through rho* at x = 0.
  std::vector<double> grid, values;
  grid.reserve(store.size() + 256);
  values.reserve(store.size() + 256);
  for (std::size_t i = 0; i < store.size(); ++i) {
    grid.push_back(store.node_x(i));
    values.push_back(store.node_q(i));
  }
  std::vector<double> kink_positions = store.breaks();  // the seed junction
  const double pad_h = (ell / rho2) / 8.0;
  const double pad_len = opts.pad_spacings * ell / rho2;
  for (double xp = x_max + pad_h; xp <= x_max + pad_len; xp += pad_h) {
    grid.push_back(xp);
    values.push_back(rho2);
  }

  CubicInterpolant interp(grid, values, kink_indices_for(grid, kink_positions));
  // Locate x_hat with W(x_hat) = rho_star on the assembled interpolant.
  std::size_t ic = 0;
  while (ic < values.size() && values[ic] < rho_star) ++ic;
  if (ic == 0 || ic == values.size()) {
    throw SolveError("solve_w_profile: could not bracket the critical density");
  }
  double lo = grid[ic - 1];
  double hi = grid[ic];
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double m = 0.5 * (lo + hi);
    if (interp(m) < rho_star) {
      lo = m;
    } else {
      hi = m;
    }
  }
  const double x_hat = 0.5 * (lo + hi);

  for (double& g : grid) g -= x_hat;
  for (double& k : kink_positions) k -= x_hat;
  std::vector<std::size_t> kidx = kink_indices_for(grid, kink_positions);
  Profile out(std::move(grid), std::move(values), ell, fbar, std::move(kidx));

  out.asymptote_left = asymptote(out, Side::Left);
  out.asymptote_right = asymptote(out, Side::Right);

  if (opts.validate_residual) {
    const double x_hi = out.x_max() - 1.05 * ell / out.min_value();
    double worst = 0.0;
    for (int i = 0; i < opts.residual_samples; ++i) {
      const double xi =
          out.x_min() + (x_hi - out.x_min()) * i / double(opts.residual_samples - 1);
      worst = std::max(worst, periodic_residual_uniform(out, model, v, xi));
    }
    if (worst > opts.residual_tol) {
      throw SolveError("solve_w_profile: periodic residual " + std::to_string(worst) +
                       " above tolerance");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Profile build_initial_data(InitKind kind, const Profile* w, double q0, double rho_plus,
                           double ell, double fbar, double x_max, double h) {
  if (!(q0 > 0.0 && q0 < 1.0)) throw DomainError("initial data: q0 outside (0, 1)");
  if (!(x_max > 2.0 * h)) throw DomainError("initial data: span too short");

  if (kind == InitKind::Constant) {
    if (std::abs(q0 - rho_plus) > 1e-12) {
      throw DomainError("initial data: constant kind requires q0 = rho_plus");
    }
    std::vector<double> grid, values;
    for (double x = 0.0; x <= x_max + 0.5 * h; x += h) {
      grid.push_back(x);
      values.push_back(q0);
    }
    return Profile(std::move(grid), std::move(values), ell, fbar);
  }

  if (w == nullptr) throw DomainError("initial data: shifted kind requires a W profile");
  if (!(q0 > w->min_value() && q0 < w->max_value())) {
    throw OutOfRangeError("initial data: q0 outside the open range of W");
  }
  // W is monotone: bisect W(s) = q0.
  double lo = w->x_min();
  double hi = w->x_max();
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double m = 0.5 * (lo + hi);
    if ((*w)(m) < q0) {
      lo = m;
    } else {
      hi = m;
    }
  }
  const double s = 0.5 * (lo + hi);

  std::vector<double> grid;
  for (double x = 0.0; x <= x_max + 0.5 * h; x += h) grid.push_back(x);
  std::vector<double> kink_positions;
  for (double k : w->kinks()) {
    const double shifted = k - s;
    if (shifted > 1e-12 && shifted < x_max - 1e-12) kink_positions.push_back(shifted);
  }
  for (double k : kink_positions) {
    auto it = std::lower_bound(grid.begin(), grid.end(), k);
    if (it == grid.end() || std::abs(*it - k) > 1e-12) grid.insert(it, k);
  }
  std::vector<double> values;
  values.reserve(grid.size());
  for (double x : grid) values.push_back((*w)(x + s));
  std::vector<std::size_t> kidx = kink_indices_for(grid, kink_positions);
  return Profile(std::move(grid), std::move(values), ell, fbar, std::move(kidx));
}

// ---------------------------------------------------------------------------

BackwardSolveResult solve_q_backward(const Profile& init, const FluxModel& model,
                                     const RoadCondition& road, double ell, double x_min,
                                     const QOptions& opts) {
  if (std::abs(init.x_min()) > 1e-9) {
    throw DomainError("solve_q_backward: initial data must start at x = 0");
  }
  if (init.x_max() < 2.0 * ell / init.min_value()) {
    throw DomainError("solve_q_backward: initial data span below two leader spacings");
  }
  if (!(x_min < 0.0)) throw DomainError("solve_q_backward: x_min must be negative");

  const double h = ell * opts.h_over_ell;
  const double q0 = init(0.0);

  BackwardStore store([&init](double x) { return init(x); }, 0.0, q0,
                      /*seed_is_break=*/false);
  DddeRhs rhs{model, store, road.v_minus, road.v_plus, ell};

  BackwardSolveResult result;
  double x = 0.0;
  double q = q0;
  double s_prev = ell / q0;  // s(0) > 0

  auto blow_up = [&](double xb) {
    result.status = SolveStatus::BlowUp;
    result.blowup_x = xb;
    return result;
  };

  while (x > x_min + 1e-14) {
    const double step = std::min(h, x - x_min);
    const double qn = rk4_backward(rhs, x, q, step);
    const bool bad = !std::isfinite(qn) || !(qn > opts.eps_q) ||
                     !(qn < 1.0 - opts.eps_q) ||
                     std::abs(qn - q) / step > opts.slope_cap;
    if (bad) return blow_up(x - step);

    const double s_new = (x - step) + ell / qn;
    const bool flipped = (s_prev > 0.0) != (s_new > 0.0);
    // The committed crossing node sits a hair on the new side; skip detection
    // while |s| is still inside that localisation band.
    if (flipped && std::abs(s_prev) > 1e-11) {
      // Locate the C1 crossing: bisect the sub-step length.
      double a = 0.0, b = step;
      const bool sign_a = s_prev > 0.0;
      double qb = qn;
      while (b - a > opts.crossing_tol) {
        const double m = 0.5 * (a + b);
        const double qm = rk4_backward(rhs, x, q, m);
        if (!std::isfinite(qm)) return blow_up(x - m);
        const double sm = (x - m) + ell / qm;
        if ((sm > 0.0) == sign_a) {
          a = m;
        } else {
          b = m;
          qb = qm;
        }
      }
      const double y_star = x - b;
      store.push(y_star, qb, /*is_break=*/true);
      result.crossings.push_back(y_star);
      x = y_star;
      q = qb;
      s_prev = x + ell / q;
      continue;
    }

    x -= step;
    q = qn;
    s_prev = s_new;
    store.push(x, q, false);
  }

  // Assemble the combined profile: backward nodes + the initial data on x > 0.
  std::vector<double> grid, values;
  grid.reserve(store.size() + init.grid().size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    grid.push_back(store.node_x(i));
    values.push_back(store.node_q(i));
  }
  for (std::size_t i = 0; i < init.grid().size(); ++i) {
    if (init.grid()[i] > 1e-14) {
      grid.push_back(init.grid()[i]);
      values.push_back(init.values()[i]);
    }
  }
  std::vector<double> kink_positions = store.breaks();
  kink_positions.push_back(0.0);
  for (double k : init.kinks()) {
    if (k > 0.0) kink_positions.push_back(k);
  }
  std::sort(kink_positions.begin(), kink_positions.end());

  std::vector<std::size_t> kidx = kink_indices_for(grid, kink_positions);
  result.profile =
      Profile(std::move(grid), std::move(values), ell, init.fbar(), std::move(kidx));
  result.status = SolveStatus::Completed;
  return result;
}

// ---------------------------------------------------------------------------

TransversalityReport transversality_report(const Profile& profile, const FluxModel& model,
                                           const RoadCondition& road, double ell) {
  (void)model;
  (void)road;
  TransversalityReport rep;
  if (profile.x_min() < 0.0 && profile.x_max() > 0.0) {
    rep.c0_applicable = true;
    rep.slope_zero_minus = profile.derivative_left(0.0);
    rep.slope_zero_plus = profile.derivative_right(0.0);
    rep.c0_pass = std::isfinite(rep.slope_zero_minus) &&
                  std::isfinite(rep.slope_zero_plus) &&
                  std::abs(rep.slope_zero_minus) < 1e6 &&
                  std::abs(rep.slope_zero_plus) < 1e6;
  }

  // Find the rightmost crossing of s(x) = x + ell / Q(x) through zero.
  const auto& grid = profile.grid();
  const auto& vals = profile.values();
  double y_star = kNan;
  for (std::size_t i = grid.size(); i-- > 1;) {
    if (grid[i] > -1e-12) continue;  // crossing lives at x < -ell
    const double s1 = grid[i] + ell / vals[i];
    if (std::abs(s1) <= 1e-10) {
      y_star = grid[i];
      break;
    }
    const double s0 = grid[i - 1] + ell / vals[i - 1];
    if ((s0 > 0.0) != (s1 > 0.0)) {
      double lo = grid[i - 1], hi = grid[i];
      const bool sign_lo = s0 > 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double m = 0.5 * (lo + hi);
        const double sm = m + ell / profile(m);
        if ((sm > 0.0) == sign_lo) {
          lo = m;
        } else {
          hi = m;
        }
      }
      y_star = 0.5 * (lo + hi);
      break;
    }
  }
  if (std::isfinite(y_star)) {
    rep.c1_applicable = true;
    rep.crossing_x = y_star;
    rep.slope_crossing_minus = profile.derivative_left(y_star);
    rep.slope_crossing_plus = profile.derivative_right(y_star);
    rep.h_slope = ell / (y_star * y_star);
    rep.c1_pass = rep.slope_crossing_minus < rep.h_slope &&
                  rep.slope_crossing_plus < rep.h_slope;
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

double residual_impl(const Profile& profile, const FluxModel& model,
                     const std::function<double(double)>& k, double x,
                     std::vector<double> breaks) {
  const double q = profile(x);
  const double xs = leader_position(x, q, profile.ell());
  if (x < profile.x_min() - 1e-12 || xs > profile.x_max() + 1e-12) {
    throw SpanError("periodic_residual: interval leaves the profile span");
  }
  for (double kx : profile.kinks()) breaks.push_back(kx);
  auto integrand = [&](double z) { return 1.0 / (k(z) * model.phi(profile(z))); };
  const double integral = integrate_with_breaks(integrand, x, xs, std::move(breaks), 1e-12);
  return std::abs(integral - profile.ell() / profile.fbar());
}

}  // namespace

double periodic_residual(const Profile& profile, const FluxModel& model,
                         const RoadCondition& road, double x) {
  return residual_impl(
      profile, model, [&road](double z) { return road.speed_limit(z); }, x, {0.0});
}

double periodic_residual_uniform(const Profile& profile, const FluxModel& model, double v,
                                 double x) {
  return residual_impl(
      profile, model, [v](double) { return v; }, x, {});
}

// ---------------------------------------------------------------------------

std::vector<double> generate_positions(const Profile& profile, double z0, int n_back,
                                       int n_fwd) {
  if (z0 < profile.x_min() || z0 > profile.x_max()) {
    throw SpanError("generate_positions: z0 outside the profile span");
  }
  const double ell = profile.ell();
  std::vector<double> forward;
  forward.push_back(z0);
  for (int i = 0; i < n_fwd; ++i) {
    const double z = forward.back();
    const double zn = z + ell / profile(z);
    if (zn > profile.x_max() + 1e-12) {
      throw RangeExhausted("generate_positions: forward recursion left the span");
    }
    forward.push_back(zn);
  }
  std::vector<double> backward;
  double target = z0;
  const double qmin = profile.min_value();
  for (int i = 0; i < n_back; ++i) {
    double lo = target - ell / qmin;
    double hi = target - ell * (1.0 - 1e-9);
    if (lo < profile.x_min() - 1e-12) {
      throw RangeExhausted("generate_positions: backward recursion left the span");
    }
    auto F = [&](double z) { return z + ell / profile(z) - target; };
    double flo = F(lo);
    double z = kNan;
    if (flo > 0.0) {
      z = lo;  // degenerate bracket; fall through to verification
    } else {
      double a = lo, b = hi;
      for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        if (F(m) <= 0.0) {
          a = m;
        } else {
          b = m;
        }
      }
      z = 0.5 * (a + b);
    }
    if (std::abs(F(z)) > 1e-12) {
      // Damped fixed-point fallback for non-monotone spacing maps.
      double zi = target - ell / profile(target);
      bool ok = false;
      for (int it = 0; it < 2000; ++it) {
        const double zn = 0.5 * zi + 0.5 * (target - ell / profile(zi));
        zi = zn;
        if (std::abs(F(zi)) <= 1e-12) {
          ok = true;
          break;
        }
      }
      if (!ok) throw SolveError("generate_positions: backward step did not converge");
      z = zi;
    }
    backward.push_back(z);
    target = z;
  }
  std::vector<double> out(backward.rbegin(), backward.rend());
  out.insert(out.end(), forward.begin(), forward.end());
  return out;
}

// ---------------------------------------------------------------------------

AsymptoteEstimate asymptote(const Profile& profile, Side side) {
  const double ell = profile.ell();
  double x0, spacing;
  if (side == Side::Left) {
    x0 = profile.x_min();
    spacing = ell / profile(x0);
    const double available =
        (profile.x_max() > 0.0 && profile.x_min() < 0.0) ? -profile.x_min()
                                                         : profile.x_max() - profile.x_min();
    if (available < 10.0 * spacing) {
      throw SpanTooShort("asymptote: need at least ten spacings on the left");
    }
  } else {
    const double xe = profile.x_max();
    spacing = ell / profile(xe);
    x0 = xe - spacing;
    const double available =
        (profile.x_max() > 0.0 && profile.x_min() < 0.0) ? profile.x_max()
                                                         : profile.x_max() - profile.x_min();
    if (available < 10.0 * spacing) {
      throw SpanTooShort("asymptote: need at least ten spacings on the right");
    }
  }
  auto f = [&](double z) { return profile(z); };
  const double mean = adaptive_simpson(f, x0, x0 + spacing, 1e-13) / spacing;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -mn;
  const int samples = 256;
  for (int i = 0; i <= samples; ++i) {
    const double z = x0 + spacing * i / samples;
    const double v = profile(z);
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  for (std::size_t i = 0; i < profile.grid().size(); ++i) {
    const double g = profile.grid()[i];
    if (g >= x0 && g <= x0 + spacing) {
      mn = std::min(mn, profile.values()[i]);
      mx = std::max(mx, profile.values()[i]);
    }
  }
  return AsymptoteEstimate{mean, mx - mn};
}

// ---------------------------------------------------------------------------

const char* to_string(MemberOutcome o) {
  switch (o) {
    case MemberOutcome::Valid:
      return "valid";
    case MemberOutcome::BlowUp:
      return "blow-up";
    case MemberOutcome::ResidualViolation:
      return "residual-violation";
    case MemberOutcome::AsymptoteMismatch:
      return "asymptote-mismatch";
    case MemberOutcome::Monotonicity:
      return "monotonicity-violation";
    case MemberOutcome::BuildFailure:
      return "build-failure";
  }
  return "?";
}

ProfileFamily::ProfileFamily(std::vector<Profile> members, std::vector<MemberReport> reports)
    : members_(std::move(members)), reports_(std::move(reports)) {
  for (const Profile& p : members_) q0s_.push_back(p.q_at_zero());
}

double ProfileFamily::band_lo(double x) const {
  if (members_.empty()) throw OutsideD("empty family");
  return members_.front()(x);
}

double ProfileFamily::band_hi(double x) const {
  if (members_.empty()) throw OutsideD("empty family");
  return members_.back()(x);
}

std::optional<double> ProfileFamily::try_psi(double x, double y) const {
  if (members_.empty()) return std::nullopt;
  const double lo = band_lo(x);
  const double hi = band_hi(x);
  if (y < lo || y > hi) return std::nullopt;
  if (members_.size() == 1) return q0s_.front();
  // Member values at x are increasing; find the bracketing pair.
  std::size_t a = 0, b = members_.size() - 1;
  while (b - a > 1) {
    const std::size_t m = (a + b) / 2;
    if (members_[m](x) <= y) {
      a = m;
    } else {
      b = m;
    }
  }
  const double va = members_[a](x);
  const double vb = members_[b](x);
  if (vb <= va) return q0s_[a];
  const double t = std::clamp((y - va) / (vb - va), 0.0, 1.0);
  return q0s_[a] + t * (q0s_[b] - q0s_[a]);
}

double ProfileFamily::psi(double x, double y) const {
  auto v = try_psi(x, y);
  if (!v) throw OutsideD("psi: point outside the family band");
  return *v;
}

double ProfileFamily::psi_clamped(double x, double y) const {
  const double lo = band_lo(x);
  const double hi = band_hi(x);
  const double yc = std::clamp(y, lo, hi);
  auto v = try_psi(x, yc);
  if (v) return *v;
  return yc <= lo ? q0s_.front() : q0s_.back();
}

double ProfileFamily::min_pairwise_gap(int samples) const {
  if (members_.size() < 2) return std::numeric_limits<double>::infinity();
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const Profile& p : members_) {
    lo = std::max(lo, p.x_min());
    hi = std::min(hi, p.x_max());
  }
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const double x = lo + (hi - lo) * i / samples;
    for (std::size_t j = 0; j + 1 < members_.size(); ++j) {
      gap = std::min(gap, members_[j + 1](x) - members_[j](x));
    }
  }
  return gap;
}

// ---------------------------------------------------------------------------

namespace {

struct MemberAttempt {
  std::optional<Profile> profile;
  MemberReport report;
};

MemberAttempt solve_and_validate(const FluxModel& model, const RoadCondition& road,
                                 double ell, const CaseReport& rep, const Profile* w,
                                 InitKind kind, double q0, double rho_plus_init,
                                 double fbar_init, double x_min,
                                 const FamilyOptions& opts) {
  MemberAttempt out;
  out.report.q0 = q0;
  try {
    const double h = ell * opts.q.h_over_ell;
    const double x_max = opts.x_max_init > 0.0
                             ? opts.x_max_init
                             : std::max(40.0 * ell, 3.0 * ell / q0);
    Profile init = build_initial_data(kind, w, q0, rho_plus_init, ell, fbar_init, x_max, h);
    BackwardSolveResult solved = solve_q_backward(init, model, road, ell, x_min, opts.q);
    if (solved.status == SolveStatus::BlowUp) {
      out.report.outcome = MemberOutcome::BlowUp;
      out.report.blowup_x = solved.blowup_x;
      return out;
    }
    Profile prof = std::move(*solved.profile);

    double worst = 0.0;
    const double res_hi = prof.x_max() - 1.05 * ell / prof.min_value();
    for (int i = 0; i < opts.residual_samples; ++i) {
      const double xi = prof.x_min() +
                        (res_hi - prof.x_min()) * i / double(opts.residual_samples - 1);
      worst = std::max(worst, periodic_residual(prof, model, road, xi));
    }
    out.report.max_residual = worst;
    if (worst > opts.residual_tol) {
      out.report.outcome = MemberOutcome::ResidualViolation;
      return out;
    }

    const AsymptoteEstimate left = asymptote(prof, Side::Left);
    out.report.left_asymptote = left;
    if (std::abs(left.value - rep.rho_minus) > opts.asymptote_tol) {
      out.report.outcome = MemberOutcome::AsymptoteMismatch;
      out.report.note = "left asymptote " + std::to_string(left.value) +
                        " does not match rho- " + std::to_string(rep.rho_minus);
      return out;
    }

    if (road.v_minus > road.v_plus) {
      // Case-1 profiles are monotone; enforce the discrete form.
      const auto& vals = prof.values();
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        if (vals[i + 1] - vals[i] < -1e-10) {
          out.report.outcome = MemberOutcome::Monotonicity;
          return out;
        }
      }
    }

    prof.case_label = rep.label;
    prof.asymptote_left = left;
    try {
      prof.asymptote_right = asymptote(prof, Side::Right);
    } catch (const SpanTooShort&) {
    }
    out.report.outcome = MemberOutcome::Valid;
    out.profile = std::move(prof);
  } catch (const Error& e) {
    out.report.outcome = MemberOutcome::BuildFailure;
    out.report.note = e.what();
  }
  return out;
}

}  // namespace

ProfileFamily build_family(const FluxModel& model, const RoadCondition& road, double ell,
                           const CaseReport& report, std::span<const double> q0_grid,
                           double x_min, const FamilyOptions& opts) {
  const char letter = report.label.size() > 1 ? report.label[1] : '?';
  std::optional<Profile> w;
  const bool needs_w = letter == 'A' || letter == 'C';
  if (needs_w) {
    w = solve_w_profile(model, road.v_plus, report.fbar, ell, opts.w);
  }

  std::vector<double> anchors(q0_grid.begin(), q0_grid.end());
  std::sort(anchors.begin(), anchors.end());

  auto run_one = [&](double q0) -> MemberAttempt {
    if (report.q0_range && !opts.probe_beyond_bound &&
        !report.q0_range->contains(q0, 1e-9)) {
      MemberAttempt a;
      a.report.q0 = q0;
      a.report.outcome = MemberOutcome::BuildFailure;
      a.report.note = "q0 outside the admissible range";
      return a;
    }
    const bool constant = std::abs(q0 - report.rho_plus) <= 1e-12 || letter == 'B';
    return solve_and_validate(model, road, ell, report, w ? &*w : nullptr,
                              constant ? InitKind::Constant : InitKind::ShiftedW, q0,
                              constant ? q0 : report.rho_plus, report.fbar, x_min, opts);
  };

  std::vector<MemberAttempt> attempts(anchors.size());
  if (opts.parallel) {
    std::vector<std::future<MemberAttempt>> futs;
    futs.reserve(anchors.size());
    for (double q0 : anchors) {
      futs.push_back(std::async(std::launch::async, run_one, q0));
    }
    for (std::size_t i = 0; i < futs.size(); ++i) attempts[i] = futs[i].get();
  } else {
    for (std::size_t i = 0; i < anchors.size(); ++i) attempts[i] = run_one(anchors[i]);
  }

  std::vector<Profile> members;
  std::vector<MemberReport> reports;
  for (auto& a : attempts) {
    reports.push_back(a.report);
    if (a.profile) members.push_back(std::move(*a.profile));
  }
  return ProfileFamily(std::move(members), std::move(reports));
}

CaseCertification certify_profiles(const FluxModel& model, const RoadCondition& road,
                                   double rho_minus, double rho_plus, double ell,
                                   double x_min, int n_anchors, const FamilyOptions& opts) {
  CaseCertification cert;
  cert.report = classify_case(model, road, rho_minus, rho_plus);
  const char letter = cert.report.label[1];
  const CaseReport& rep = cert.report;

  std::vector<std::pair<InitKind, double>> anchors;  // (kind, q0)
  if (letter == 'A' || letter == 'C') {
    // Anchors across the range of admissible right-side data (shifts of W,
    // plus the constant top member on a downhill road).  A-cases scan their
    // admissible Q(0) range; C-cases scan the full span of shifts of W.
    double lo = rep.rho1_plus;
    double hi = rep.rho2_plus;
    if (rep.q0_range) {
      lo = rep.q0_range->lo;
      hi = rep.q0_range->hi;
    }
    const double off = 1e-4 * (hi - lo);
    const bool downhill = road.v_minus > road.v_plus;
    const bool top_constant = downhill && std::abs(hi - rep.rho2_plus) <= 1e-12;
    const double top = top_constant ? hi : hi - off;
    for (int i = 0; i < n_anchors; ++i) {
      const double q0 = lo + off + (top - lo - off) * (i + 1) / double(n_anchors);
      if (top_constant && i == n_anchors - 1) {
        anchors.emplace_back(InitKind::Constant, hi);
      } else {
        anchors.emplace_back(InitKind::ShiftedW, q0);
      }
    }
  } else if (letter == 'B') {
    anchors.emplace_back(InitKind::Constant, rho_plus);
  } else {  // 'D'
    // Constants around the prescribed right state; none can reach rho-.
    const double spread = 0.4 * std::min(rho_plus, rep.rho_star - rho_plus);
    for (int i = 0; i < n_anchors; ++i) {
      const double c = rho_plus - spread + 2.0 * spread * i / double(std::max(1, n_anchors - 1));
      anchors.emplace_back(InitKind::Constant, c);
    }
  }

  std::optional<Profile> w;
  for (auto& [kind, q0] : anchors) {
    if (kind == InitKind::ShiftedW && !w) {
      w = solve_w_profile(model, road.v_plus, rep.fbar, ell, opts.w);
    }
    const double rho_plus_init = kind == InitKind::Constant ? q0 : rho_plus;
    const double fbar_init = kind == InitKind::Constant
                                 ? model.flux(road.v_plus, q0)
                                 : rep.fbar;
    MemberAttempt a =
        solve_and_validate(model, road, ell, rep, w ? &*w : nullptr, kind, q0,
                           rho_plus_init, fbar_init, x_min, opts);
    cert.anchors.push_back(a.report);
    if (a.profile) {
      cert.any_valid = true;
      cert.valid_profiles.push_back(std::move(*a.profile));
    }
  }
  return cert;
}

}  // namespace ftlwave
