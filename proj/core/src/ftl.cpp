#include "ftlwave/ftl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftlwave/errors.hpp"

namespace ftlwave {

namespace {

// Relative slack absorbing integrator roundoff in the spacing check.
constexpr double kSpacingSlack = 1e-12;

struct Workspace {
  std::vector<double> v, k1, k2, k3, k4, tmp;
  void resize(std::size_t n) {
    v.resize(n);
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);
  }
};

void velocities(const std::vector<double>& z, double ell, double front_density,
                const FluxModel& model, const RoadCondition& road, std::vector<double>& v) {
  const std::size_t n = z.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double rho = ell / (z[i + 1] - z[i]);
    v[i] = road.speed_limit(z[i]) * model.phi(rho);
  }
  v[n - 1] = road.speed_limit(z[n - 1]) * model.phi(front_density);
}

// One classical 4-stage step of size dt starting from z; result into out.
void rk4_step(const std::vector<double>& z, double dt, double ell, double front_density,
              const FluxModel& model, const RoadCondition& road, Workspace& ws,
              std::vector<double>& out) {
  const std::size_t n = z.size();
  velocities(z, ell, front_density, model, road, ws.k1);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = z[i] + 0.5 * dt * ws.k1[i];
  velocities(ws.tmp, ell, front_density, model, road, ws.k2);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = z[i] + 0.5 * dt * ws.k2[i];
  velocities(ws.tmp, ell, front_density, model, road, ws.k3);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = z[i] + dt * ws.k3[i];
  velocities(ws.tmp, ell, front_density, model, road, ws.k4);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = z[i] + dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
  }
}

}  // namespace

void CarEnsemble::validate() const {
  if (!(ell > 0.0)) throw DomainError("ensemble: car length must be positive");
  if (positions.size() < 1) throw DomainError("ensemble: need at least one car");
  if (!(front_boundary_density > 0.0 && front_boundary_density <= 1.0)) {
    throw DomainError("ensemble: front boundary density outside (0, 1]");
  }
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    const double gap = positions[i + 1] - positions[i];
    if (gap < ell * (1.0 - kSpacingSlack)) {
      throw SpacingViolation(i, gap, ell);
    }
  }
}

std::vector<double> discrete_density(const CarEnsemble& ensemble) {
  ensemble.validate();
  const auto& z = ensemble.positions;
  std::vector<double> rho(z.size());
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    rho[i] = ensemble.ell / (z[i + 1] - z[i]);
  }
  rho[z.size() - 1] = ensemble.front_boundary_density;
  return rho;
}

std::vector<double> ftl_rhs(const CarEnsemble& ensemble, const FluxModel& model,
                            const RoadCondition& road) {
  ensemble.validate();
  std::vector<double> v(ensemble.positions.size());
  velocities(ensemble.positions, ensemble.ell, ensemble.front_boundary_density, model, road,
             v);
  return v;
}

std::size_t Trajectory::snapshot_index(double t, double tol) const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= tol) return i;
  }
  throw AlignmentError("trajectory: no snapshot at t = " + std::to_string(t));
}

Trajectory simulate(const CarEnsemble& initial, const FluxModel& model,
                    const RoadCondition& road, double T, double dt, const SimOptions& opts) {
  initial.validate();
  if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("simulate: T and dt must be positive");

  const double ell = initial.ell;
  const double front = initial.front_boundary_density;
  const std::size_t n = initial.positions.size();

  Workspace ws;
  ws.resize(n);
  std::vector<double> z = initial.positions;
  std::vector<double> zn;

  Trajectory traj;
  traj.ell = ell;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.positions.push_back(z);
    CarEnsemble snap{z, ell, front};
    traj.densities.push_back(discrete_density(snap));
  };

  record(0.0);
  double t = 0.0;
  std::size_t next_record = 1;
  const double t_eps = 1e-12 * std::max(1.0, T);

  while (t < T - t_eps) {
    double t_target = T;
    if (opts.record_every > 0.0) {
      t_target = std::min(T, next_record * opts.record_every);
    }
    double step = std::min(dt, t_target - t);

    rk4_step(z, step, ell, front, model, road, ws, zn);

    if (opts.event_resolved) {
      // Split the step at the earliest crossing of x = 0.
      bool crossed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (z[i] < 0.0 && zn[i] >= 0.0) {
          crossed = true;
          break;
        }
      }
      if (crossed) {
        double a = 0.0, b = step;
        while (b - a > 1e-15) {
          const double m = 0.5 * (a + b);
          rk4_step(z, m, ell, front, model, road, ws, zn);
          bool any = false;
          double worst = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            if (z[i] < 0.0 && zn[i] >= 0.0) {
              any = true;
              worst = std::max(worst, zn[i]);
            }
          }
          if (any) {
            b = m;
            if (worst <= opts.event_tol) break;
          } else {
            a = m;
          }
        }
        step = b;
        rk4_step(z, step, ell, front, model, road, ws, zn);
        for (std::size_t i = 0; i < n; ++i) {
          if (z[i] < 0.0 && zn[i] >= 0.0) {
            traj.events.push_back(Event{t + step, i, false});
            if (i > 0) traj.events.push_back(Event{t + step, i - 1, true});
          }
        }
      }
    }

    // Spacing invariant at the accepted step; never silently repaired.
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double gap = zn[i + 1] - zn[i];
      if (gap < ell * (1.0 - kSpacingSlack)) {
        throw SpacingViolation(i, gap, ell);
      }
    }
    z.swap(zn);
    t += step;

    if (opts.record_every > 0.0) {
      const double t_rec = next_record * opts.record_every;
      if (t >= t_rec - t_eps && t_rec <= T + t_eps) {
        record(t_rec);
        ++next_record;
      }
    }
  }
  if (traj.times.empty() || std::abs(traj.times.back() - T) > t_eps) record(T);
  return traj;
}

CarEnsemble riemann_initial(double rho_l, double rho_r, double ell, double x0, int n_left,
                            int n_right) {
  if (!(rho_l > 0.0 && rho_l < 1.0) || !(rho_r > 0.0 && rho_r < 1.0)) {
    throw DomainError("riemann_initial: densities must lie in (0, 1)");
  }
  if (!(ell > 0.0)) throw DomainError("riemann_initial: car length must be positive");
  const double left_spacing = ell / rho_l;
  if (x0 < 0.0 || x0 >= left_spacing) {
    throw DomainError("riemann_initial: x0 must lie within one left spacing");
  }
  CarEnsemble e;
  e.ell = ell;
  e.front_boundary_density = rho_r;
  e.positions.reserve(static_cast<std::size_t>(n_left + n_right + 1));
  for (int i = -n_left; i < 0; ++i) {
    e.positions.push_back(i * left_spacing - x0);
  }
  for (int i = 0; i <= n_right; ++i) {
    e.positions.push_back(i * ell / rho_r);
  }
  e.validate();
  return e;
}

CarEnsemble ensemble_from_profile(const Profile& profile, double z0, int n_back, int n_fwd) {
  CarEnsemble e;
  e.ell = profile.ell();
  e.positions = generate_positions(profile, z0, n_back, n_fwd);
  e.front_boundary_density = profile(e.positions.back());
  e.validate();
  return e;
}

double default_dt(const CarEnsemble& ensemble, const FluxModel& model,
                  const RoadCondition& road) {
  std::vector<double> v = ftl_rhs(ensemble, model, road);
  double vmax = 0.0;
  for (double vi : v) vmax = std::max(vmax, vi);
  const double vcap = std::max(vmax, 1e-6 * std::max(road.v_minus, road.v_plus));
  (void)model;
  return 0.1 * ensemble.ell / vcap;
}

TvPsiResult tv_psi(const std::vector<double>& positions, const std::vector<double>& densities,
                   const ProfileFamily& family) {
  if (positions.size() != densities.size()) {
    throw DomainError("tv_psi: positions/densities size mismatch");
  }
  TvPsiResult r;
  r.psi.resize(positions.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> clamped(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto p = family.try_psi(positions[i], densities[i]);
    if (p) {
      r.psi[i] = *p;
    } else {
      ++r.outside_count;
    }
    clamped[i] = family.psi_clamped(positions[i], densities[i]);
  }
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    if (std::isfinite(r.psi[i]) && std::isfinite(r.psi[i + 1])) {
      r.tv_in_band += std::abs(r.psi[i] - r.psi[i + 1]);
    }
    r.tv_clamped += std::abs(clamped[i] - clamped[i + 1]);
  }
  return r;
}

double periodicity_check(const Trajectory& traj, double t_p, std::size_t interior_margin) {
  if (traj.times.size() < 2) throw AlignmentError("periodicity: need at least two snapshots");
  const double tol = 1e-9 * std::max(1.0, std::abs(t_p));
  double worst = -1.0;
  for (std::size_t a = 0; a < traj.times.size(); ++a) {
    // Find the snapshot at times[a] + t_p, if recorded.
    const double target = traj.times[a] + t_p;
    std::size_t b = traj.times.size();
    for (std::size_t j = a + 1; j < traj.times.size(); ++j) {
      if (std::abs(traj.times[j] - target) <= tol) {
        b = j;
        break;
      }
      if (traj.times[j] > target + tol) break;
    }
    if (b == traj.times.size()) continue;
    const auto& za = traj.positions[a];
    const auto& zb = traj.positions[b];
    const std::size_t n = za.size();
    if (n < 2 * interior_margin + 2) continue;
    for (std::size_t i = interior_margin; i + 1 < n - interior_margin; ++i) {
      worst = std::max(worst, std::abs(zb[i] - za[i + 1]));
    }
  }
  if (worst < 0.0) {
    throw AlignmentError("periodicity: t_p is not resolvable on the recorded time grid");
  }
  return worst;
}

}  // namespace ftlwave
