#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "ftlwave/model.hpp"
#include "ftlwave/profile.hpp"

namespace ftlwave {

struct ViscousExistence {
  bool exists = false;
  double rho_hat = std::nan("");  // witness: midpoint of the feasible set
  Interval feasible;              // feasible rho_hat interval when exists
};

/// Existence test for a monotone stationary viscous profile connecting
/// rho- (at -inf) to rho+ (at +inf) across the speed-limit jump.
ViscousExistence viscous_existence(const FluxModel& model, const RoadCondition& road,
                                   double rho_minus, double rho_plus);

struct ViscousProfile {
  std::vector<double> grid;
  std::vector<double> values;
  double epsilon = 0.0;
  double fbar = 0.0;
  double anchor = 0.0;  // rho(0)

  /// Max |centered difference - RHS| over interior nodes, skipping the jump.
  double max_ode_residual(const FluxModel& model, const RoadCondition& road) const;
};

struct ViscousOptions {
  double grid_step_over_epsilon = 1e-3;  // output node spacing as a fraction of epsilon
};

struct ViscousResult {
  SolveStatus status = SolveStatus::Completed;
  std::optional<ViscousProfile> profile;
  double blowup_x = std::nan("");
};

/// Integrates eps * rho' = f(k(x), rho) - fbar from the anchor at x = 0,
/// forward with V+ and backward with V-.  Leaving [0, 1] is reported as a
/// blow-up (inadmissible anchor), not an error.
ViscousResult stationary_profile(const FluxModel& model, const RoadCondition& road,
                                 double epsilon, double fbar, double rho_at_zero,
                                 double xspan, const ViscousOptions& opts = {});

/// Cell-average state of the viscous conservation law on a uniform grid.
struct PdeState {
  double x_left = 0.0;  // left edge of the first cell
  double dx = 0.0;
  std::vector<double> rho;
  double epsilon = 0.0;
  double time = 0.0;

  double cell_center(std::size_t j) const { return x_left + (j + 0.5) * dx; }
  static PdeState riemann(double a, double b, double dx, double rho_l, double rho_r,
                          double epsilon);
};

struct PdeOptions {
  double cfl = 0.4;
  double record_every = 0.0;  // 0: record only the initial and final states
  double bc_left = std::nan("");   // NaN: pin to the initial edge values
  double bc_right = std::nan("");
};

struct PdeRun {
  std::vector<PdeState> snapshots;
  double max_conservation_defect = 0.0;  // per-step mass balance error
  double min_seen = 0.0;                  // extremes over all steps
  double max_seen = 0.0;
  std::size_t steps = 0;
};

/// Monotone local Lax-type flux plus explicit central diffusion; conservative
/// across the speed-limit jump, which sits on a cell interface.
PdeRun pde_solve(const PdeState& init, const FluxModel& model, const RoadCondition& road,
                 double T, const PdeOptions& opts = {});

}  // namespace ftlwave
