#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftlwave/interpolant.hpp"
#include "ftlwave/model.hpp"

namespace ftlwave {

struct AsymptoteEstimate {
  double value = 0.0;
  double band = 0.0;  // max - min over the outermost spacing interval
};

/// Sampled density profile x -> Q(x) with monotone piecewise-cubic evaluation
/// and constant extension beyond the grid.  Kink positions (the speed-limit
/// jump, C1 crossings, seeding junctions) are first-class: interpolation does
/// not smear the derivative jumps there.
class Profile {
 public:
  Profile(std::vector<double> grid, std::vector<double> values, double ell, double fbar,
          std::vector<std::size_t> kink_indices = {});

  double operator()(double x) const { return interp_(x); }
  double derivative(double x) const { return interp_.derivative(x); }
  double derivative_left(double x) const { return interp_.derivative_left(x); }
  double derivative_right(double x) const { return interp_.derivative_right(x); }

  const std::vector<double>& grid() const { return interp_.x(); }
  const std::vector<double>& values() const { return interp_.y(); }
  const std::vector<double>& kinks() const { return kink_x_; }

  double x_min() const { return interp_.x_min(); }
  double x_max() const { return interp_.x_max(); }
  double ell() const { return ell_; }
  double fbar() const { return fbar_; }
  double q_at_zero() const { return interp_(0.0); }
  double min_value() const { return min_value_; }
  double max_value() const { return max_value_; }

  std::optional<std::string> case_label;
  std::optional<AsymptoteEstimate> asymptote_left;
  std::optional<AsymptoteEstimate> asymptote_right;

 private:
  CubicInterpolant interp_;
  std::vector<double> kink_x_;
  double ell_, fbar_;
  double min_value_, max_value_;
};

/// Position of the leader of a car at x with local density q: x + ell / q.
double leader_position(double x, double q, double ell);

struct WOptions {
  double h_over_ell = 1.0 / 64;   // backward march step, as a fraction of ell
  double seed_delta = 1e-7;       // offset below the right asymptote at the seed
  double span_spacings = 60.0;    // backward march length in left-state spacings
  double pad_spacings = 45.0;     // constant right tail kept after re-shifting
  double tail_spacings = 46.0;    // left tail required below the crossing
  double residual_tol = 1e-6;
  int residual_samples = 50;
  bool validate_residual = true;
};

/// Heteroclinic profile of the uniform-road equation, normalised to W(0) = rho*.
/// Asymptotes are the two roots of flux(v, .) = fbar.
Profile solve_w_profile(const FluxModel& model, double v, double fbar, double ell,
                        const WOptions& opts = {});

enum class InitKind { ShiftedW, Constant };

/// Data on x >= 0 for the backward solve: a horizontal shift of W with the
/// prescribed value at 0, or the constant rho_plus.
Profile build_initial_data(InitKind kind, const Profile* w, double q0, double rho_plus,
                           double ell, double fbar, double x_max, double h);

struct QOptions {
  double h_over_ell = 1.0 / 64;
  double eps_q = 1e-9;        // barrier distance from {0, 1}
  double slope_cap = 1e6;     // |Q'| beyond this certifies blow-up
  double crossing_tol = 1e-12;
};

enum class SolveStatus { Completed, BlowUp };

struct BackwardSolveResult {
  SolveStatus status = SolveStatus::Completed;
  std::optional<Profile> profile;           // set when Completed
  double blowup_x = std::nan("");           // set when BlowUp
  std::vector<double> crossings;            // C1 crossing locations y*
};

/// Solves the delayed equation backward from data on x >= 0 down to x_min by
/// method of steps, switching the right-hand side branch at the speed-limit
/// jump and at the C1 curve Q = -ell/x.  Exiting (eps_q, 1 - eps_q) or hitting
/// the slope cap is reported as a certified blow-up, not an error.
BackwardSolveResult solve_q_backward(const Profile& init, const FluxModel& model,
                                     const RoadCondition& road, double ell, double x_min,
                                     const QOptions& opts = {});

struct TransversalityReport {
  bool c0_applicable = false;
  double slope_zero_minus = std::nan("");
  double slope_zero_plus = std::nan("");
  bool c0_pass = false;
  bool c1_applicable = false;
  double crossing_x = std::nan("");
  double slope_crossing_minus = std::nan("");
  double slope_crossing_plus = std::nan("");
  double h_slope = std::nan("");  // ell / y*^2
  bool c1_pass = false;
};

/// One-sided slopes at the two discontinuity curves of the backward solve.
TransversalityReport transversality_report(const Profile& profile, const FluxModel& model,
                                           const RoadCondition& road, double ell);

/// | integral_x^{x#} dz / (k(z) phi(Q(z)))  -  ell / fbar |.
double periodic_residual(const Profile& profile, const FluxModel& model,
                         const RoadCondition& road, double x);
/// Same identity on a uniform road with speed limit v.
double periodic_residual_uniform(const Profile& profile, const FluxModel& model, double v,
                                 double x);

/// Car positions generated by the profile: z_{i+1} = z_i + ell / Q(z_i), with
/// z_0 = z0; backward steps invert the spacing map by bisection.
std::vector<double> generate_positions(const Profile& profile, double z0, int n_back,
                                       int n_fwd);

enum class Side { Left, Right };

/// Mean of Q over the outermost spacing interval on the given side, with the
/// oscillation band (max - min) over that interval.
AsymptoteEstimate asymptote(const Profile& profile, Side side);

enum class MemberOutcome {
  Valid,
  BlowUp,
  ResidualViolation,
  AsymptoteMismatch,
  Monotonicity,
  BuildFailure,
};

const char* to_string(MemberOutcome o);

struct MemberReport {
  double q0 = std::nan("");
  MemberOutcome outcome = MemberOutcome::BuildFailure;
  double blowup_x = std::nan("");
  double max_residual = std::nan("");
  AsymptoteEstimate left_asymptote;
  std::string note;
};

struct FamilyOptions {
  QOptions q;
  WOptions w;
  double x_max_init = -1.0;    // <= 0: choose automatically
  double residual_tol = 1e-6;
  int residual_samples = 25;
  double asymptote_tol = 1e-3;
  bool parallel = false;
  bool probe_beyond_bound = false;  // allow q0 outside the proven admissible range
};

/// Non-crossing family of profiles sharing (road, flux level, ell), sorted and
/// parametrised by the value at 0.
class ProfileFamily {
 public:
  ProfileFamily(std::vector<Profile> members, std::vector<MemberReport> reports);

  const std::vector<Profile>& members() const { return members_; }
  const std::vector<double>& q0s() const { return q0s_; }
  const std::vector<MemberReport>& reports() const { return reports_; }
  bool empty() const { return members_.empty(); }

  double band_lo(double x) const;
  double band_hi(double x) const;

  /// Q(0)-label of the member through (x, y); linear in y between members.
  /// Throws OutsideD below the lowest or above the highest member.
  double psi(double x, double y) const;
  std::optional<double> try_psi(double x, double y) const;
  /// psi with y clamped into the band; always defined.
  double psi_clamped(double x, double y) const;

  /// Minimum vertical gap between adjacent members over the common span.
  double min_pairwise_gap(int samples = 512) const;

 private:
  std::vector<Profile> members_;
  std::vector<double> q0s_;
  std::vector<MemberReport> reports_;
};

/// Builds the family of profiles for an A-type case over the given Q(0) grid;
/// per-member failures are collected in the reports, not thrown.
ProfileFamily build_family(const FluxModel& model, const RoadCondition& road, double ell,
                           const CaseReport& report, std::span<const double> q0_grid,
                           double x_min, const FamilyOptions& opts = {});

struct CaseCertification {
  CaseReport report;
  std::vector<MemberReport> anchors;
  std::vector<Profile> valid_profiles;
  bool any_valid = false;
};

/// Runs the backward solver over a scan of case-appropriate anchors and
/// validates each outcome against the case's boundary data.  For the
/// nonexistence cases every anchor fails, certifying the verdict.
CaseCertification certify_profiles(const FluxModel& model, const RoadCondition& road,
                                   double rho_minus, double rho_plus, double ell,
                                   double x_min, int n_anchors,
                                   const FamilyOptions& opts = {});

}  // namespace ftlwave
