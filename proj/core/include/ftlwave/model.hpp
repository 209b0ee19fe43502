#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ftlwave {

/// Velocity law phi and the induced flux f(V, rho) = V * rho * phi(rho).
///
/// phi must satisfy phi(0) = 1, phi(1) = 0 and phi' <= -c_hat0 < 0; the flux
/// must be strictly concave in rho for every speed limit in use.  Both bounds
/// are estimated on a sampling grid at construction when not supplied, and a
/// thin margin produces a warning instead of a failure.
class FluxModel {
 public:
  using Fn = std::function<double(double)>;

  FluxModel(std::string name, Fn phi, Fn phi_prime = {},
            std::optional<double> c_hat0 = std::nullopt);

  /// Lighthill-Whitham law phi(rho) = 1 - rho.
  static FluxModel lighthill_whitham();

  double phi(double rho) const { return phi_(rho); }
  double phi_prime(double rho) const;

  /// f(V, rho) = V rho phi(rho); domain error outside rho in [0, 1].
  double flux(double v, double rho) const;
  /// d/drho of the flux.
  double flux_prime(double v, double rho) const;
  /// Maximum of |flux_prime| over [0, 1], sampled.
  double max_wave_speed(double v) const;

  double c_hat0() const { return c_hat0_; }
  /// Estimated concavity margin c0 with f'' <= -c0 for this speed limit.
  double concavity_margin(double v) const;

  const std::string& name() const { return name_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::string name_;
  Fn phi_;
  Fn phi_prime_;
  double c_hat0_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Piecewise-constant speed limit with a single jump at x = 0, right-continuous.
struct RoadCondition {
  double v_minus;
  double v_plus;

  RoadCondition(double v_minus_, double v_plus_);
  double speed_limit(double x) const { return x < 0.0 ? v_minus : v_plus; }
  bool has_jump() const { return v_minus != v_plus; }
};

enum class Verdict { InfinitelyMany, Unique, None };

const char* to_string(Verdict v);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;
  bool contains(double q, double tol = 0.0) const;
};

/// Classification of a stationary jump (rho-, rho+) at the given flux level.
///
/// Root naming follows the flux ordering: rho1_* are the sub-critical roots of
/// f-(rho) = fbar resp. f+(rho) = fbar, rho2_* the super-critical ones.
struct CaseReport {
  std::string label;  // "1A" ... "2D"
  Verdict verdict = Verdict::None;
  double fbar = 0.0;
  double rho_star = 0.0;
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  double rho1_minus = 0.0;
  double rho1_plus = 0.0;
  double rho2_plus = 0.0;
  double rho2_minus = 0.0;
  std::optional<Interval> q0_range;
  bool degenerate = false;  // fbar at the maximum of the smaller flux
};

struct RhResult {
  double fbar = 0.0;
  bool trivial = false;  // fbar == 0: empty or bumper-to-bumper road
};

/// Unique maximizer of the flux; independent of the speed limit.
double critical_density(const FluxModel& model, double v);

/// The two solutions of flux(v, rho) = fbar, bracketing the critical density.
std::pair<double, double> fbar_roots(const FluxModel& model, double v, double fbar);

/// Verifies f-(rho-) = f+(rho+) and returns the common flux level.
RhResult check_rankine_hugoniot(const FluxModel& model, const RoadCondition& road,
                                double rho_minus, double rho_plus);

/// Eight-way case classification with existence verdict and admissible Q(0) range.
CaseReport classify_case(const FluxModel& model, const RoadCondition& road,
                         double rho_minus, double rho_plus);

}  // namespace ftlwave
