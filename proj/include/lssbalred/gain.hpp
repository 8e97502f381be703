#pragma once

// L2 / l2 gain upper bounds from the bounded-real LMI, and the Hankel-norm
// bound sigma_max.

#include "lssbalred/families.hpp"
#include "lssbalred/grammians.hpp"
#include "lssbalred/lmi.hpp"
#include "lssbalred/stability.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace lssbalred {

struct GainCertificate {
  double gamma = 0.0;
  Matrix P;
  std::vector<double> residuals;
};

struct GainOptions {
  double margin = -1.0;
  double tol = 1e-4;  // relative bisection tolerance
  int max_iterations = 60;
  lmi::SolverOptions solver;
};

/// Searches for P > 0 with G_gamma(q, P) < 0 for every mode.
inline std::optional<GainCertificate> gamma_feasible(const LssModel& model, double gamma, const GainOptions& opts = {},
                                                     const std::optional<Matrix>& warm_start = std::nullopt) {
  require_valid(model);
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  const double margin = opts.margin > 0 ? opts.margin : families::default_margin(model);
  const auto sys = families::system(model, families::SetKind::kGain, margin, gamma);
  lmi::SolverOptions so = opts.solver;
  if (warm_start) so.warm_start = warm_start;
  const auto res = lmi::solve_feasibility(sys, so);
  if (!res.feasible()) return std::nullopt;
  GainCertificate cert;
  cert.gamma = gamma;
  cert.P = linalg::symmetrize(res.solution);
  cert.residuals = families::membership(model, cert.P, families::SetKind::kGain, gamma).residuals;
  for (double r : cert.residuals)
    if (!(r < 0.0)) return std::nullopt;
  return cert;
}

struct GainResult {
  double gamma_star = 0.0;
  GainCertificate certificate;
  int iterations = 0;
  /// (gamma, feasible) for every probe, in order.
  std::vector<std::pair<double, bool>> trace;
};

/// Bisection on gamma. The upper bracket starts at max_q ||B_q|| ||C_q|| and
/// doubles until feasible; gamma_star is the feasible end of the bracket.
inline GainResult l2_gain_upper_bound(const LssModel& model, const GainOptions& opts = {}) {
  require_valid(model);
  const auto cert = check_quadratic_stability(model, StabilityOptions{opts.margin, opts.solver});
  if (!cert) throw InfeasibleError("no quadratic stability certificate: gain bound unavailable");
  GainResult out;
  double hi = 0.0;
  for (Index q = 0; q < model.num_modes(); ++q) {
    Eigen::JacobiSVD<Matrix> sb(model.B(q)), sc(model.C(q));
    const double nb = sb.singularValues().size() ? sb.singularValues()(0) : 0.0;
    const double nc = sc.singularValues().size() ? sc.singularValues()(0) : 0.0;
    hi = std::max(hi, nb * nc);
  }
  if (!(hi > 0.0)) hi = 1.0;
  std::optional<Matrix> warm = cert->P;
  std::optional<GainCertificate> best;
  for (int k = 0; k < opts.max_iterations && !best; ++k) {
    ++out.iterations;
    auto c = gamma_feasible(model, hi, opts, warm);
    out.trace.emplace_back(hi, c.has_value());
    if (c) {
      best = std::move(c);
    } else {
      hi *= 2.0;
    }
  }
  if (!best) throw InfeasibleError("gain bisection: no feasible upper bracket found");
  double lo = 0.0;
  warm = best->P;
  while (out.iterations < opts.max_iterations && hi - lo > opts.tol * hi) {
    ++out.iterations;
    const double mid = 0.5 * (lo + hi);
    auto c = gamma_feasible(model, mid, opts, warm);
    out.trace.emplace_back(mid, c.has_value());
    if (c) {
      hi = mid;
      warm = c->P;
      best = std::move(c);
    } else {
      lo = mid;
    }
  }
  out.gamma_star = hi;
  out.certificate = *best;
  return out;
}

/// Largest singular value of a grammian pair, an upper bound on the Hankel norm.
inline double hankel_upper_bound(const GrammianPair& pair) { return singular_values(pair)(0); }

}  // namespace lssbalred
