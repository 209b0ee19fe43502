#include "ftlwave/viscous.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftlwave/errors.hpp"

namespace ftlwave {

namespace {

constexpr int kScan = 4000;  // samples in the existence scan

}  // namespace

ViscousExistence viscous_existence(const FluxModel& model, const RoadCondition& road,
                                   double rho_minus, double rho_plus) {
  const RhResult rh = check_rankine_hugoniot(model, road, rho_minus, rho_plus);
  if (rh.trivial) throw DomainError("viscous_existence: trivial flux level");
  const double fbar = rh.fbar;

  ViscousExistence out;
  if (std::abs(rho_minus - rho_plus) < 1e-14) {
    out.exists = true;
    out.rho_hat = rho_minus;
    out.feasible = Interval{rho_minus, rho_minus, false, false};
    return out;
  }

  const bool increasing = rho_minus < rho_plus;
  const double a = std::min(rho_minus, rho_plus);
  const double b = std::max(rho_minus, rho_plus);
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> fm(kScan + 1), fp(kScan + 1);
  for (int i = 0; i <= kScan; ++i) {
    const double rho = a + (b - a) * i / kScan;
    fm[i] = model.flux(road.v_minus, rho) - fbar;
    fp[i] = model.flux(road.v_plus, rho) - fbar;
  }

  // Feasibility of each candidate rho_hat = grid point i, with the strict
  // inequalities enforced on the open interior of each sub-interval.
  // increasing: f- > fbar on (rho-, hat), f+ > fbar on (hat, rho+);
  // decreasing: f+ < fbar on (rho+, hat), f- < fbar on (hat, rho-).
  std::vector<bool> ok(kScan + 1, false);
  if (increasing) {
    // suf[i]: min of fp over samples [i, kScan-1] (endpoint b excluded).
    std::vector<double> suf(kScan + 1, inf);
    for (int i = kScan - 1; i >= 1; --i) suf[i] = std::min(fp[i], suf[i + 1]);
    double pre_min_fm = inf;  // min of fm over samples [1, i-1]
    for (int i = 0; i <= kScan; ++i) {
      const double lmin = pre_min_fm;
      const double rmin = (i + 1 <= kScan - 1) ? suf[i + 1] : inf;
      ok[i] = lmin > 1e-12 && rmin > 1e-12;
      if (i >= 1 && i <= kScan - 1) pre_min_fm = std::min(pre_min_fm, fm[i]);
    }
  } else {
    // suf[i]: max of fm over samples [i, kScan-1].
    std::vector<double> suf(kScan + 1, -inf);
    for (int i = kScan - 1; i >= 1; --i) suf[i] = std::max(fm[i], suf[i + 1]);
    double pre_max_fp = -inf;  // max of fp over samples [1, i-1]
    for (int i = 0; i <= kScan; ++i) {
      const double lmax = pre_max_fp;
      const double rmax = (i + 1 <= kScan - 1) ? suf[i + 1] : -inf;
      ok[i] = lmax < -1e-12 && rmax < -1e-12;
      if (i >= 1 && i <= kScan - 1) pre_max_fp = std::max(pre_max_fp, fp[i]);
    }
  }

  double lo_feasible = std::nan("");
  double hi_feasible = std::nan("");
  for (int i = 0; i <= kScan; ++i) {
    if (ok[i]) {
      const double hat = a + (b - a) * i / kScan;
      if (std::isnan(lo_feasible)) lo_feasible = hat;
      hi_feasible = hat;
    }
  }
  if (!std::isnan(lo_feasible)) {
    out.exists = true;
    out.feasible = Interval{lo_feasible, hi_feasible, false, false};
    out.rho_hat = 0.5 * (lo_feasible + hi_feasible);
  }
  return out;
}

double ViscousProfile::max_ode_residual(const FluxModel& model,
                                        const RoadCondition& road) const {
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < grid.size(); ++j) {
    const double x = grid[j];
    // Centered differences are meaningless across the speed-limit jump.
    if (std::abs(x) <= 1.5 * (grid[j + 1] - grid[j])) continue;
    const double slope = (values[j + 1] - values[j - 1]) / (grid[j + 1] - grid[j - 1]);
    const double rhs = (model.flux(road.speed_limit(x), values[j]) - fbar) / epsilon;
    worst = std::max(worst, std::abs(slope - rhs));
  }
  return worst;
}

ViscousResult stationary_profile(const FluxModel& model, const RoadCondition& road,
                                 double epsilon, double fbar, double rho_at_zero,
                                 double xspan, const ViscousOptions& opts) {
  if (!(epsilon > 0.0)) throw DomainError("stationary_profile: epsilon must be positive");
  if (!(rho_at_zero > 0.0 && rho_at_zero < 1.0)) {
    throw DomainError("stationary_profile: anchor outside (0, 1)");
  }
  if (!(xspan > 0.0)) throw DomainError("stationary_profile: span must be positive");

  const double h = epsilon * opts.grid_step_over_epsilon;
  const std::size_t n_half = static_cast<std::size_t>(std::ceil(xspan / h));

  ViscousResult result;
  std::vector<double> right(n_half + 1), left(n_half + 1);
  right[0] = rho_at_zero;
  left[0] = rho_at_zero;

  auto rhs = [&](double v, double rho) { return (model.flux(v, rho) - fbar) / epsilon; };
  auto rk4 = [&](double v, double rho, double step) {
    const double k1 = rhs(v, rho);
    const double k2 = rhs(v, std::clamp(rho + 0.5 * step * k1, 0.0, 1.0));
    const double k3 = rhs(v, std::clamp(rho + 0.5 * step * k2, 0.0, 1.0));
    const double k4 = rhs(v, std::clamp(rho + step * k3, 0.0, 1.0));
    return rho + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  for (std::size_t j = 0; j < n_half; ++j) {
    const double next = rk4(road.v_plus, right[j], h);
    if (!(next >= -1e-12) || !(next <= 1.0 + 1e-12) || !std::isfinite(next)) {
      result.status = SolveStatus::BlowUp;
      result.blowup_x = (j + 1) * h;
      return result;
    }
    right[j + 1] = std::clamp(next, 0.0, 1.0);
  }
  for (std::size_t j = 0; j < n_half; ++j) {
    const double next = rk4(road.v_minus, left[j], -h);
    if (!(next >= -1e-12) || !(next <= 1.0 + 1e-12) || !std::isfinite(next)) {
      result.status = SolveStatus::BlowUp;
      result.blowup_x = -double(j + 1) * h;
      return result;
    }
    left[j + 1] = std::clamp(next, 0.0, 1.0);
  }

  ViscousProfile prof;
  prof.epsilon = epsilon;
  prof.fbar = fbar;
  prof.anchor = rho_at_zero;
  prof.grid.reserve(2 * n_half + 1);
  prof.values.reserve(2 * n_half + 1);
  for (std::size_t j = n_half; j > 0; --j) {
    prof.grid.push_back(-double(j) * h);
    prof.values.push_back(left[j]);
  }
  for (std::size_t j = 0; j <= n_half; ++j) {
    prof.grid.push_back(double(j) * h);
    prof.values.push_back(right[j]);
  }
  result.profile = std::move(prof);
  return result;
}

PdeState PdeState::riemann(double a, double b, double dx, double rho_l, double rho_r,
                           double epsilon) {
  if (!(a < 0.0 && b > 0.0)) throw DomainError("pde: domain must contain the jump at 0");
  // Snap the grid so a cell interface falls exactly on x = 0.
  const std::size_t n_left = static_cast<std::size_t>(std::ceil(-a / dx));
  const std::size_t n_right = static_cast<std::size_t>(std::ceil(b / dx));
  PdeState s;
  s.x_left = -double(n_left) * dx;
  s.dx = dx;
  s.epsilon = epsilon;
  s.rho.resize(n_left + n_right);
  for (std::size_t j = 0; j < s.rho.size(); ++j) {
    s.rho[j] = s.cell_center(j) < 0.0 ? rho_l : rho_r;
  }
  return s;
}

PdeRun pde_solve(const PdeState& init, const FluxModel& model, const RoadCondition& road,
                 double T, const PdeOptions& opts) {
  if (init.rho.size() < 4) throw DomainError("pde: need at least four cells");
  if (!(init.dx > 0.0)) throw DomainError("pde: dx must be positive");
  for (double r : init.rho) {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("pde: initial data outside [0, 1]");
  }

  const std::size_t n = init.rho.size();
  const double dx = init.dx;
  const double eps = init.epsilon;
  const double bc_l = std::isnan(opts.bc_left) ? init.rho.front() : opts.bc_left;
  const double bc_r = std::isnan(opts.bc_right) ? init.rho.back() : opts.bc_right;

  const double wave = std::max(model.max_wave_speed(road.v_minus),
                               model.max_wave_speed(road.v_plus));
  double dt = opts.cfl * std::min(dx / wave, eps > 0.0 ? dx * dx / (2.0 * eps)
                                                       : std::numeric_limits<double>::max());

  PdeRun run;
  PdeState state = init;
  run.min_seen = *std::min_element(state.rho.begin(), state.rho.end());
  run.max_seen = *std::max_element(state.rho.begin(), state.rho.end());
  run.min_seen = std::min(run.min_seen, std::min(bc_l, bc_r));
  run.max_seen = std::max(run.max_seen, std::max(bc_l, bc_r));
  run.snapshots.push_back(state);

  std::vector<double> flux(n + 1), diff(n + 1), next(n);

  auto cell_value = [&](std::ptrdiff_t j) -> double {
    if (j < 0) return bc_l;
    if (j >= static_cast<std::ptrdiff_t>(n)) return bc_r;
    return state.rho[static_cast<std::size_t>(j)];
  };
  auto cell_k = [&](std::ptrdiff_t j) -> double {
    const double xc = state.x_left + (static_cast<double>(j) + 0.5) * dx;
    return road.speed_limit(xc);
  };

  double t = 0.0;
  std::size_t next_record = 1;
  const double t_eps = 1e-12 * std::max(1.0, T);

  while (t < T - t_eps) {
    double t_target = T;
    if (opts.record_every > 0.0) t_target = std::min(T, next_record * opts.record_every);
    const double step = std::min(dt, t_target - t);

    for (std::size_t i = 0; i <= n; ++i) {
      const std::ptrdiff_t jl = static_cast<std::ptrdiff_t>(i) - 1;
      const std::ptrdiff_t jr = static_cast<std::ptrdiff_t>(i);
      const double ul = cell_value(jl);
      const double ur = cell_value(jr);
      const double kl = cell_k(jl);
      const double kr = cell_k(jr);
      const double alpha = std::max(std::abs(model.flux_prime(kl, ul)),
                                    std::abs(model.flux_prime(kr, ur)));
      flux[i] = 0.5 * (model.flux(kl, ul) + model.flux(kr, ur)) - 0.5 * alpha * (ur - ul);
      diff[i] = eps * (ur - ul) / dx;
    }
    for (std::size_t j = 0; j < n; ++j) {
      next[j] = state.rho[j] - step / dx * (flux[j + 1] - flux[j]) +
                step / dx * (diff[j + 1] - diff[j]);
    }

    // Discrete conservation: the update telescopes to the boundary fluxes.
    double mass_old = 0.0, mass_new = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mass_old += state.rho[j];
      mass_new += next[j];
    }
    const double boundary = -step * (flux[n] - flux[0]) + step * (diff[n] - diff[0]);
    run.max_conservation_defect = std::max(
        run.max_conservation_defect, std::abs((mass_new - mass_old) * dx - boundary));

    state.rho.swap(next);
    t += step;
    state.time = t;
    ++run.steps;

    for (double r : state.rho) {
      run.min_seen = std::min(run.min_seen, r);
      run.max_seen = std::max(run.max_seen, r);
    }

    if (opts.record_every > 0.0) {
      const double t_rec = next_record * opts.record_every;
      if (t >= t_rec - t_eps && t_rec <= T + t_eps) {
        run.snapshots.push_back(state);
        ++next_record;
      }
    }
  }
  if (run.snapshots.empty() || std::abs(run.snapshots.back().time - T) > t_eps) {
    run.snapshots.push_back(state);
  }
  return run;
}

}  // namespace ftlwave
