#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ftlwave/model.hpp"
#include "ftlwave/profile.hpp"

namespace ftlwave {

/// Ordered car positions over a finite index window.  The lead car has no
/// leader; its density is frozen at front_boundary_density.
struct CarEnsemble {
  std::vector<double> positions;  // strictly increasing, gaps >= ell
  double ell = 0.0;
  double front_boundary_density = 0.0;

  void validate() const;  // throws SpacingViolation / DomainError
};

/// rho_i = ell / (z_{i+1} - z_i); the lead car gets the frozen front density.
std::vector<double> discrete_density(const CarEnsemble& ensemble);

/// v_i = k(z_i) * phi(rho_i).
std::vector<double> ftl_rhs(const CarEnsemble& ensemble, const FluxModel& model,
                            const RoadCondition& road);

struct Event {
  double t = 0.0;
  std::size_t car = 0;
  bool leader = false;  // false: the car itself crossed 0; true: its leader did
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;  // one snapshot per time
  std::vector<std::vector<double>> densities;
  std::vector<Event> events;
  double ell = 0.0;

  /// Index of the snapshot recorded at time t (within tol); AlignmentError if absent.
  std::size_t snapshot_index(double t, double tol = 1e-9) const;
};

struct SimOptions {
  bool event_resolved = true;
  double record_every = 0.0;  // 0: record only t = 0 and t = T
  double event_tol = 1e-10;   // position tolerance of the crossing bisection
};

/// Explicit 4-stage integration of the car positions; crossings of the
/// speed-limit jump are localised by bisection and the step split there.
/// The spacing invariant is enforced at every accepted step.
Trajectory simulate(const CarEnsemble& initial, const FluxModel& model,
                    const RoadCondition& road, double T, double dt,
                    const SimOptions& opts = {});

/// Two uniform lattices with densities rho_l (i < 0, shifted left by x0) and
/// rho_r (i >= 0, z_0 = 0).
CarEnsemble riemann_initial(double rho_l, double rho_r, double ell, double x0, int n_left,
                            int n_right);

/// Positions generated by a profile, with the front density read off the profile.
CarEnsemble ensemble_from_profile(const Profile& profile, double z0, int n_back, int n_fwd);

/// Step size heuristic: a tenth of a car length at the fastest car's speed.
double default_dt(const CarEnsemble& ensemble, const FluxModel& model,
                  const RoadCondition& road);

struct TvPsiResult {
  double tv_in_band = 0.0;   // sum over consecutive pairs of in-band cars
  double tv_clamped = 0.0;   // all cars, out-of-band values clamped to the band edge
  int outside_count = 0;
  std::vector<double> psi;   // NaN for cars outside the band
};

/// Total variation of the family label Psi over consecutive cars.
TvPsiResult tv_psi(const std::vector<double>& positions, const std::vector<double>& densities,
                   const ProfileFamily& family);

/// max_i |z_i(t + t_p) - z_{i+1}(t)| over interior cars and all aligned snapshot
/// pairs; AlignmentError if t_p is not resolvable on the recorded time grid.
double periodicity_check(const Trajectory& traj, double t_p, std::size_t interior_margin = 2);

}  // namespace ftlwave
