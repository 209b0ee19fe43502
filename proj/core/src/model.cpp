#include "ftlwave/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftlwave/errors.hpp"

namespace ftlwave {

namespace {

constexpr int kValidationGrid = 2000;
constexpr int kMaxBisect = 200;

double bisect(const std::function<double(double)>& f, double a, double b, double fa,
              double tol) {
  for (int it = 0; it < kMaxBisect && (b - a) > tol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fa < 0.0) == (fm < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

FluxModel::FluxModel(std::string name, Fn phi, Fn phi_prime, std::optional<double> c_hat0)
    : name_(std::move(name)), phi_(std::move(phi)), phi_prime_(std::move(phi_prime)) {
  if (!phi_) throw DomainError("flux model: phi is required");
  if (std::abs(phi_(0.0) - 1.0) > 1e-12) throw DomainError("flux model: phi(0) != 1");
  if (std::abs(phi_(1.0)) > 1e-12) throw DomainError("flux model: phi(1) != 0");

  double min_neg_slope = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kValidationGrid; ++i) {
    const double rho = static_cast<double>(i) / kValidationGrid;
    min_neg_slope = std::min(min_neg_slope, -this->phi_prime(rho));
  }
  if (min_neg_slope <= 0.0) {
    throw DomainError("flux model: phi is not strictly decreasing");
  }
  if (c_hat0) {
    c_hat0_ = *c_hat0;
    if (min_neg_slope < c_hat0_ - 1e-12) {
      warnings_.push_back("sampled -phi' dips below the supplied c_hat0");
    }
  } else {
    c_hat0_ = min_neg_slope;
  }
  if (c_hat0_ < 1e-6) {
    warnings_.push_back("c_hat0 margin below 1e-6; phi is nearly flat somewhere");
  }
  const double c0 = concavity_margin(1.0);
  if (c0 <= 0.0) throw DomainError("flux model: flux is not strictly concave");
  if (c0 < 1e-6) warnings_.push_back("concavity margin c0 below 1e-6");
}

FluxModel FluxModel::lighthill_whitham() {
  return FluxModel(
      "lighthill-whitham", [](double rho) { return 1.0 - rho; },
      [](double) { return -1.0; }, 1.0);
}

double FluxModel::phi_prime(double rho) const {
  if (phi_prime_) return phi_prime_(rho);
  const double e = 1e-6;
  const double a = std::max(0.0, rho - e);
  const double b = std::min(1.0, rho + e);
  return (phi_(b) - phi_(a)) / (b - a);
}

double FluxModel::flux(double v, double rho) const {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw DomainError("flux: density outside [0, 1]");
  }
  if (!(v > 0.0)) throw DomainError("flux: speed limit must be positive");
  return v * rho * phi_(rho);
}

double FluxModel::flux_prime(double v, double rho) const {
  return v * (phi_(rho) + rho * phi_prime(rho));
}

double FluxModel::max_wave_speed(double v) const {
  double m = 0.0;
  for (int i = 0; i <= kValidationGrid; ++i) {
    const double rho = static_cast<double>(i) / kValidationGrid;
    m = std::max(m, std::abs(flux_prime(v, rho)));
  }
  return m;
}

double FluxModel::concavity_margin(double v) const {
  // Second differences of the flux on the sampling grid.
  const double h = 1.0 / kValidationGrid;
  double margin = std::numeric_limits<double>::infinity();
  double fm = v * 0.0 * phi_(0.0);
  double f0 = v * h * phi_(h);
  for (int i = 1; i + 1 <= kValidationGrid; ++i) {
    const double rho_next = static_cast<double>(i + 1) * h;
    const double fp = v * rho_next * phi_(rho_next);
    margin = std::min(margin, -(fp - 2.0 * f0 + fm) / (h * h));
    fm = f0;
    f0 = fp;
  }
  return margin;
}

RoadCondition::RoadCondition(double v_minus_, double v_plus_)
    : v_minus(v_minus_), v_plus(v_plus_) {
  if (!(v_minus > 0.0) || !(v_plus > 0.0)) {
    throw DomainError("road condition: speed limits must be positive");
  }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::InfinitelyMany:
      return "infinitely-many";
    case Verdict::Unique:
      return "unique";
    case Verdict::None:
      return "none";
  }
  return "?";
}

bool Interval::contains(double q, double tol) const {
  if (lo_open ? (q <= lo + tol) : (q < lo - tol)) return false;
  if (hi_open ? (q >= hi - tol) : (q > hi + tol)) return false;
  return true;
}

double critical_density(const FluxModel& model, double v) {
  auto dflux = [&](double rho) { return model.flux_prime(v, rho); };
  const double fa = dflux(0.0);
  const double fb = dflux(1.0);
  if (!(fa > 0.0) || !(fb < 0.0)) {
    throw NoRootError("critical density: flux derivative does not change sign");
  }
  return bisect(dflux, 0.0, 1.0, fa, 1e-14);
}

std::pair<double, double> fbar_roots(const FluxModel& model, double v, double fbar) {
  if (!(fbar > 0.0)) throw NoRootError("fbar_roots: flux level must be positive");
  const double rho_star = critical_density(model, v);
  const double fmax = model.flux(v, rho_star);
  if (fbar > fmax) {
    throw NoRootError("fbar_roots: flux level exceeds the maximum flux");
  }
  if (fbar == fmax) return {rho_star, rho_star};
  auto g = [&](double rho) { return model.flux(v, rho) - fbar; };
  const double lo = bisect(g, 0.0, rho_star, g(0.0), 1e-15);
  const double hi = bisect(g, rho_star, 1.0, g(rho_star), 1e-15);
  return {lo, hi};
}

RhResult check_rankine_hugoniot(const FluxModel& model, const RoadCondition& road,
                                double rho_minus, double rho_plus) {
  const double fm = model.flux(road.v_minus, rho_minus);
  const double fp = model.flux(road.v_plus, rho_plus);
  const double fbar = 0.5 * (fm + fp);
  if (std::abs(fm - fp) > 1e-10 * std::max(1.0, fbar)) {
    throw RhViolation(fm, fp);
  }
  RhResult r;
  r.fbar = fbar;
  r.trivial = fbar <= 1e-14;
  return r;
}

CaseReport classify_case(const FluxModel& model, const RoadCondition& road,
                         double rho_minus, double rho_plus) {
  if (!road.has_jump()) {
    throw DomainError("classify: road condition has no jump");
  }
  const RhResult rh = check_rankine_hugoniot(model, road, rho_minus, rho_plus);
  if (rh.trivial) {
    throw DomainError("classify: trivial flux level fbar = 0 (empty or jammed road)");
  }

  CaseReport rep;
  rep.fbar = rh.fbar;
  rep.rho_star = critical_density(model, road.v_minus);
  rep.rho_minus = rho_minus;
  rep.rho_plus = rho_plus;

  const auto [m_lo, m_hi] = fbar_roots(model, road.v_minus, rep.fbar);
  const auto [p_lo, p_hi] = fbar_roots(model, road.v_plus, rep.fbar);
  const bool downhill = road.v_minus > road.v_plus;  // case 1
  if (downhill) {
    rep.rho1_minus = m_lo;
    rep.rho2_minus = m_hi;
    rep.rho1_plus = p_lo;
    rep.rho2_plus = p_hi;
  } else {
    rep.rho1_plus = p_lo;
    rep.rho2_plus = p_hi;
    rep.rho1_minus = m_lo;
    rep.rho2_minus = m_hi;
  }
  const double small_v = std::min(road.v_minus, road.v_plus);
  const double fmax_small = model.flux(small_v, rep.rho_star);
  rep.degenerate = std::abs(rep.fbar - fmax_small) <= 1e-12 * std::max(1.0, fmax_small);

  // Match each side against its own flux roots; nearest root wins.
  const bool minus_low = std::abs(rho_minus - m_lo) <= std::abs(rho_minus - m_hi);
  const bool plus_low = std::abs(rho_plus - p_lo) <= std::abs(rho_plus - p_hi);

  char letter;
  if (minus_low && !plus_low) {
    letter = 'A';
  } else if (minus_low && plus_low) {
    letter = 'B';
  } else if (!minus_low && !plus_low) {
    letter = 'C';
  } else {
    letter = 'D';
  }
  // The degenerate level collapses the inner roots, so A is the covering case.
  if (rep.degenerate && (letter == 'A' || letter == 'B')) letter = 'A';
  rep.label = std::string(1, downhill ? '1' : '2') + letter;

  switch (letter) {
    case 'A': {
      rep.verdict = Verdict::InfinitelyMany;
      Interval q0;
      if (downhill) {
        q0.lo = rep.rho1_plus;
        q0.hi = rho_plus;
        q0.lo_open = !rep.degenerate;
        q0.hi_open = false;
      } else {
        q0.lo = rep.rho1_plus;
        q0.hi = rep.rho2_minus;
        q0.lo_open = false;
        q0.hi_open = false;
      }
      rep.q0_range = q0;
      break;
    }
    case 'B': {
      rep.verdict = Verdict::Unique;
      rep.q0_range = Interval{rho_plus, rho_plus, false, false};
      break;
    }
    default:
      rep.verdict = Verdict::None;
      break;
  }
  return rep;
}

}  // namespace ftlwave
