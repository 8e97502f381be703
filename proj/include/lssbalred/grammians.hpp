#pragma once

// Controllability and observability grammians by every available route:
// per-mode LMIs, scaling of a stability certificate, exact "nice" grammians
// from the summed Stein equations, and the averaged LMI relaxation. Also
// singular values, set membership and transport under isomorphisms.

#include "lssbalred/families.hpp"
#include "lssbalred/lmi.hpp"
#include "lssbalred/model.hpp"
#include "lssbalred/realization.hpp"
#include "lssbalred/stability.hpp"

#include <optional>
#include <string>

namespace lssbalred {

enum class GrammianKind { kControllability, kObservability };

enum class Provenance { kLmi, kCertificate, kNice, kAveraged, kUser };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kLmi: return "lmi";
    case Provenance::kCertificate: return "certificate";
    case Provenance::kNice: return "nice";
    case Provenance::kAveraged: return "averaged";
    case Provenance::kUser: return "user";
  }
  return "?";
}

inline families::SetKind set_of(GrammianKind k) {
  return k == GrammianKind::kControllability ? families::SetKind::kControllability
                                             : families::SetKind::kObservability;
}

struct GrammianPair {
  Matrix P;  // controllability
  Matrix Q;  // observability
  Provenance provenance = Provenance::kLmi;
  double margin = 0.0;
  /// Whether both matrices satisfy their inequalities with margin > 0.
  bool strict = false;
  /// Whether trace tightening was applied.
  bool tightened = false;
  int iterations = 0;
};

struct GrammianOptions {
  double margin = -1.0;  // negative: default margin for the model
  bool tighten = true;
  double tighten_tol = 1e-6;
  bool certificate_fallback = true;
  std::optional<Matrix> seed;
  lmi::SolverOptions solver;
};

namespace detail {

inline double margin_for(const LssModel& model, double requested) {
  return requested > 0 ? requested : families::default_margin(model);
}

/// Largest gamma in [lo, hi]-style search with feasible(gamma) monotone
/// decreasing in gamma: halve from 1 until feasible, double while feasible,
/// then bisect to `rel_tol`. Returns the feasible end of the bracket.
template <class Feasible>
std::optional<double> largest_feasible(Feasible feasible, double rel_tol) {
  double lo = 1.0;
  int guard = 0;
  while (!feasible(lo)) {
    lo *= 0.5;
    if (++guard > 200) return std::nullopt;
  }
  double hi = lo * 2.0;
  guard = 0;
  while (feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) return lo;
  }
  while (hi - lo > rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace detail

/// Builds a grammian from a quadratic stability certificate P:
///   observability:   Q = P / gamma,
///   controllability: P_c = P^-1 / gamma,
/// with gamma as large as the strict inequality allows (bisection to 1e-6
/// relative).
inline Matrix grammian_from_certificate(const StabilityCertificate& cert, const LssModel& model, GrammianKind kind,
                                        double margin = -1.0) {
  require_valid(model);
  margin = detail::margin_for(model, margin);
  const auto stab = families::membership(model, cert.P, families::SetKind::kStability);
  if (!stab.positive_definite || !(stab.worst < 0.0))
    throw InputError("certificate residual is not negative");
  const Index n = model.n();
  Matrix base = linalg::symmetrize(cert.P);
  if (kind == GrammianKind::kControllability) {
    // A^T P + P A < 0  <=>  A R + R A^T < 0 with R = P^-1; likewise for Stein.
    base = linalg::symmetrize(Eigen::LLT<Matrix>(base).solve(Matrix::Identity(n, n)));
  }
  const auto set = set_of(kind);
  auto feasible = [&](double gamma) {
    const Matrix x = base / gamma;
    const auto r = families::membership(model, x, set);
    return r.positive_definite && r.worst <= -margin && linalg::min_eigenvalue(x) >= margin;
  };
  const auto gamma = detail::largest_feasible(feasible, 1e-6);
  if (!gamma) throw InfeasibleError("no grammian found: certificate scaling failed");
  return base / *gamma;
}

/// Grammian from the per-mode LMIs, trace-tightened by default. Falls back
/// to certificate scaling when the solver gives up.
inline Matrix lmi_grammian(const LssModel& model, GrammianKind kind, const GrammianOptions& opts = {},
                           int* iterations = nullptr) {
  require_valid(model);
  const double margin = detail::margin_for(model, opts.margin);
  const auto sys = families::system(model, set_of(kind), margin);
  lmi::SolverOptions so = opts.solver;
  if (opts.seed) so.warm_start = *opts.seed;
  const auto res = lmi::solve_feasibility(sys, so);
  if (iterations) *iterations = res.iterations;
  Matrix x;
  if (res.feasible()) {
    x = linalg::symmetrize(res.solution);
  } else if (opts.certificate_fallback) {
    const auto cert = check_quadratic_stability(model, StabilityOptions{margin, opts.solver});
    if (!cert) throw InfeasibleError("no grammian found: LMI solver and certificate fallback both failed");
    x = grammian_from_certificate(*cert, model, kind, margin);
  } else {
    throw InfeasibleError("no grammian found within budget");
  }
  if (opts.tighten) x = lmi::tighten_trace(sys, x, opts.tighten_tol, opts.solver);
  return x;
}

inline GrammianPair lmi_grammians(const LssModel& model, const GrammianOptions& opts = {}) {
  GrammianPair pair;
  int it_p = 0, it_q = 0;
  GrammianOptions o = opts;
  pair.P = lmi_grammian(model, GrammianKind::kControllability, o, &it_p);
  pair.Q = lmi_grammian(model, GrammianKind::kObservability, o, &it_q);
  pair.provenance = Provenance::kLmi;
  pair.margin = detail::margin_for(model, opts.margin);
  pair.strict = true;
  pair.tightened = opts.tighten;
  pair.iterations = it_p + it_q;
  return pair;
}

/// Certificate route for both grammians.
inline GrammianPair certificate_grammians(const LssModel& model, const GrammianOptions& opts = {}) {
  const double margin = detail::margin_for(model, opts.margin);
  const auto cert = check_quadratic_stability(model, StabilityOptions{margin, opts.solver});
  if (!cert) throw InfeasibleError("no quadratic stability certificate found");
  GrammianPair pair;
  pair.P = grammian_from_certificate(*cert, model, GrammianKind::kControllability, margin);
  pair.Q = grammian_from_certificate(*cert, model, GrammianKind::kObservability, margin);
  pair.provenance = Provenance::kCertificate;
  pair.margin = margin;
  pair.strict = true;
  pair.iterations = cert->iterations;
  return pair;
}

namespace detail {

/// Solves X = sum_q F_q X F_q^T + G for X (column-major vec).
inline Matrix summed_stein(const std::vector<Matrix>& fs, const Matrix& g) {
  const Index n = g.rows();
  Matrix k = Matrix::Identity(n * n, n * n);
  for (const auto& f : fs) k -= linalg::kron(f, f);
  Matrix x = linalg::unvec(k.partialPivLu().solve(linalg::vec(g)), n, n);
  return linalg::symmetrize(x);
}

inline double stein_residual(const std::vector<Matrix>& fs, const Matrix& g, const Matrix& x) {
  Matrix r = g - x;
  for (const auto& f : fs) r += f * x * f.transpose();
  return r.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Unique PSD solutions of P = sum_q (A_q P A_q^T + B_q B_q^T) and
/// Q = sum_q (A_q^T Q A_q + C_q^T C_q). Positive definite exactly when the
/// model is span-reachable (resp. observable), so `strict` may be false.
inline GrammianPair nice_grammians(const LssModel& model) {
  require_valid(model);
  if (!model.discrete()) throw InputError("nice grammians require a discrete-time model");
  if (!check_strong_stability(model).stable) throw InputError("nice grammians require a strongly stable model");
  const Index n = model.n();
  std::vector<Matrix> as, ats;
  Matrix bb = Matrix::Zero(n, n), cc = Matrix::Zero(n, n);
  for (Index q = 0; q < model.num_modes(); ++q) {
    as.push_back(model.A(q));
    ats.push_back(model.A(q).transpose());
    bb += model.B(q) * model.B(q).transpose();
    cc += model.C(q).transpose() * model.C(q);
  }
  GrammianPair pair;
  pair.P = detail::summed_stein(as, bb);
  pair.Q = detail::summed_stein(ats, cc);
  const double scale = std::max({1.0, pair.P.cwiseAbs().maxCoeff(), pair.Q.cwiseAbs().maxCoeff()});
  if (detail::stein_residual(as, bb, pair.P) > 1e-9 * scale || detail::stein_residual(ats, cc, pair.Q) > 1e-9 * scale)
    throw InfeasibleError("nice grammian solve residual too large");
  pair.provenance = Provenance::kNice;
  pair.margin = 0.0;
  pair.strict = false;
  return pair;
}

/// Truncated series sum over words |w| <= depth of A_w B~ B~^T A_w^T and
/// A_w^T C~^T C~ A_w. Test oracle only.
inline GrammianPair nice_grammian_series_oracle(const LssModel& model, int depth) {
  require_valid(model);
  if (depth < 0) throw InputError("oracle depth must be nonnegative");
  double terms = 0.0, level = 1.0;
  for (int k = 0; k <= depth; ++k) {
    terms += level;
    level *= static_cast<double>(model.num_modes());
  }
  if (terms > 1e7) throw InputError("oracle budget exceeded: too many words");
  const Index n = model.n();
  GrammianPair pair;
  pair.P = Matrix::Zero(n, n);
  pair.Q = Matrix::Zero(n, n);
  const Matrix bt = model.stacked_B();
  const Matrix ct = model.stacked_C();
  // Depth-first, carrying A_w so that memory stays O(depth).
  std::function<void(const Matrix&, int)> visit = [&](const Matrix& aw, int len) {
    const Matrix awb = aw * bt;
    const Matrix caw = ct * aw;
    pair.P += awb * awb.transpose();
    pair.Q += caw.transpose() * caw;
    if (len == depth) return;
    for (Index q = 0; q < model.num_modes(); ++q) visit(model.A(q) * aw, len + 1);
  };
  visit(Matrix::Identity(n, n), 0);
  pair.P = linalg::symmetrize(pair.P);
  pair.Q = linalg::symmetrize(pair.Q);
  pair.provenance = Provenance::kNice;
  return pair;
}

/// Grammians from the summed inequalities
///   sum_q (A_q P A_q^T + B_q B_q^T) - P <= -margin,
///   sum_q (A_q^T Q A_q + C_q^T C_q) - Q <= -margin.
inline GrammianPair averaged_grammians(const LssModel& model, const GrammianOptions& opts = {}) {
  require_valid(model);
  require_discrete(model, "averaged grammians");
  const double margin = detail::margin_for(model, opts.margin);
  GrammianPair pair;
  pair.provenance = Provenance::kAveraged;
  pair.margin = margin;
  pair.strict = true;
  pair.tightened = opts.tighten;
  std::optional<GrammianPair> nice;
  if (check_strong_stability(model).stable) nice = nice_grammians(model);
  for (auto kind : {GrammianKind::kControllability, GrammianKind::kObservability}) {
    const auto sys = families::averaged_system(model, set_of(kind), margin);
    lmi::SolverOptions so = opts.solver;
    if (nice) {
      // Nice grammian plus eps * I is strictly feasible for eps large enough.
      const Matrix base = kind == GrammianKind::kControllability ? nice->P : nice->Q;
      for (double eps = margin; eps < 1e12; eps *= 4.0) {
        const Matrix s = base + eps * Matrix::Identity(model.n(), model.n());
        if (sys.satisfied_by(s, 0.0)) {
          so.warm_start = s;
          break;
        }
      }
    }
    const auto res = lmi::solve_feasibility(sys, so);
    if (!res.feasible()) throw InfeasibleError("no averaged grammian found within budget");
    Matrix x = linalg::symmetrize(res.solution);
    if (opts.tighten) x = lmi::tighten_trace(sys, x, opts.tighten_tol, opts.solver);
    (kind == GrammianKind::kControllability ? pair.P : pair.Q) = x;
    pair.iterations += res.iterations;
  }
  return pair;
}

/// sigma_i = sqrt(lambda_i(P Q)), descending, through L^T Q L with P = L L^T.
inline Vector singular_values(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.rows() != p.cols() || q.rows() != q.cols())
    throw InputError("singular_values: size mismatch");
  const Matrix l = linalg::cholesky_lower(p, "controllability grammian");
  if (!linalg::is_symmetric(q, 1e-8) || linalg::min_eigenvalue(q) <= 0.0)
    throw InputError("observability grammian is not positive definite");
  Vector ev = linalg::sym_eigenvalues(l.transpose() * q * l).cwiseMax(0.0).cwiseSqrt();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

inline Vector singular_values(const GrammianPair& pair) { return singular_values(pair.P, pair.Q); }

using families::MembershipReport;
using families::SetKind;

/// Residuals of X against the S, O, C or G_gamma inequalities.
inline MembershipReport check_membership(const LssModel& model, const Matrix& x, SetKind set, double gamma = 0.0) {
  return families::membership(model, x, set, gamma);
}

/// Transport of a set member along S: Sigma_1 -> Sigma_2. Controllability
/// grammians map to S X S^T; S, O and G_gamma members to S^-T X S^-1.
inline Matrix transport(const Matrix& x, const Isomorphism& iso, SetKind set) {
  const Isomorphism checked = make_isomorphism(iso.S);
  if (set == SetKind::kControllability) return linalg::symmetrize(checked.S * x * checked.S.transpose());
  const Matrix sinv = checked.S.inverse();
  return linalg::symmetrize(sinv.transpose() * x * sinv);
}

inline GrammianPair transport_pair(const GrammianPair& pair, const Isomorphism& iso) {
  GrammianPair out = pair;
  out.P = transport(pair.P, iso, SetKind::kControllability);
  out.Q = transport(pair.Q, iso, SetKind::kObservability);
  return out;
}

struct MinimalRealizationPair {
  LssModel model;
  GrammianPair pair;
};

/// Carries (P, Q) through minimize(). On the reachable part P' is the inverse
/// of the leading block of P^-1 and Q' the leading block of Q (dually on the
/// observable part), so P' in C and Q' in O of the minimal model, and its
/// singular values interlace those of (P, Q).
inline MinimalRealizationPair minimize_with_grammians(const LssModel& model, const GrammianPair& pair) {
  require_valid(model);
  const Index n = model.n();
  if (pair.P.rows() != n || pair.Q.rows() != n) throw InputError("minimize_with_grammians: grammian size mismatch");
  linalg::cholesky_lower(pair.P, "controllability grammian");
  linalg::cholesky_lower(pair.Q, "observability grammian");
  auto leading_schur = [](const Matrix& x, Index r) -> Matrix {
    return linalg::symmetrize(x.inverse().topLeftCorner(r, r).inverse());
  };
  MinimalRealizationPair out;
  out.pair = pair;

  const SubspaceBasis reach = reachable_subspace(model);
  const Index r = reach.dimension();
  const Matrix t1 = linalg::complete_basis(reach.basis, n);
  out.model = detail::restrict_leading(model, t1, r);
  if (r == 0) {
    out.pair.P = out.pair.Q = Matrix(0, 0);
    return out;
  }
  const Matrix p1 = leading_schur(t1.transpose() * pair.P * t1, r);
  const Matrix q1 = linalg::symmetrize((t1.transpose() * pair.Q * t1).topLeftCorner(r, r));

  const SubspaceBasis obs = reachable_subspace(dual_system(out.model));
  const Index k = obs.dimension();
  const Matrix t2 = linalg::complete_basis(obs.basis, r);
  out.model = detail::restrict_leading(out.model, t2, k);
  if (k == 0) {
    out.pair.P = out.pair.Q = Matrix(0, 0);
    return out;
  }
  out.pair.P = linalg::symmetrize((t2.transpose() * p1 * t2).topLeftCorner(k, k));
  out.pair.Q = leading_schur(t2.transpose() * q1 * t2, k);
  return out;
}

/// Level sums X_k = sum_{|w|=k} A_w B~ B~^T A_w^T give
/// sum_{|v|,|s|<=L} ||H_{s,v}||_F^2 = sum_k c_k tr(C~^T C~ X_k) with
/// c_k = k + 1 for k <= L and 2L - k + 1 for L < k <= 2L.
inline double hankel_frobenius_sum(const LssModel& model, int max_len) {
  if (max_len < 0) throw InputError("hankel_frobenius_sum: negative length");
  const Matrix bt = model.stacked_B();
  const Matrix ct = model.stacked_C();
  const Matrix ctc = ct.transpose() * ct;
  Matrix x = bt * bt.transpose();
  double total = 0.0;
  for (int k = 0; k <= 2 * max_len; ++k) {
    const double weight = k <= max_len ? k + 1.0 : 2.0 * max_len - k + 1.0;
    total += weight * (ctc.cwiseProduct(x)).sum();
    Matrix next = Matrix::Zero(x.rows(), x.cols());
    for (Index q = 0; q < model.num_modes(); ++q) next += model.A(q) * x * model.A(q).transpose();
    x = std::move(next);
  }
  return total;
}

}  // namespace lssbalred
