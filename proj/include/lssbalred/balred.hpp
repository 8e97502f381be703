#pragma once

// Balancing and balanced truncation with the a-priori bound 2 * sum of the
// discarded singular values.

#include "lssbalred/grammians.hpp"
#include "lssbalred/model.hpp"
#include "lssbalred/realization.hpp"

#include <numeric>
#include <variant>

namespace lssbalred {

struct BalancingResult {
  Isomorphism transform;
  LssModel balanced_model;
  Vector lambda;  // descending
  GrammianPair pair;
};

/// S = Lambda^{1/2} K^T U^-1 where P = U U^T (Cholesky) and
/// U^T Q U = K Lambda^2 K^T. Then S P S^T = S^-T Q S^-1 = Lambda.
inline BalancingResult balance(const LssModel& model, const GrammianPair& pair) {
  require_valid(model);
  const Index n = model.n();
  if (pair.P.rows() != n || pair.Q.rows() != n) throw InputError("balance: grammian size does not match the model");
  if (linalg::spd_condition(pair.P) > 1e12) throw InputError("ill-conditioned grammian");
  const Matrix u = linalg::cholesky_lower(pair.P, "controllability grammian");
  if (linalg::min_eigenvalue(pair.Q) <= 0.0) throw InputError("observability grammian is not positive definite");
  Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(u.transpose() * pair.Q * u));
  // Descending order with a stable tie break.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return es.eigenvalues()(a) > es.eigenvalues()(b); });
  Matrix k(n, n);
  Vector lambda(n);
  for (Index i = 0; i < n; ++i) {
    const Index j = order[static_cast<std::size_t>(i)];
    Vector col = es.eigenvectors().col(j);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0) col = -col;
    k.col(i) = col;
    lambda(i) = std::sqrt(std::max(es.eigenvalues()(j), 0.0));
  }
  if (lambda(n - 1) <= 0.0) throw InputError("ill-conditioned grammian");
  // U^-1 via triangular solve: S = diag(sqrt(lambda)) K^T U^-1.
  const Matrix kt_uinv =
      u.transpose().triangularView<Eigen::Upper>().solve(k).transpose();  // (U^-T K)^T = K^T U^-1
  const Matrix s = lambda.cwiseSqrt().asDiagonal() * kt_uinv;
  BalancingResult out;
  out.transform = make_isomorphism(s);
  out.balanced_model = apply_isomorphism(model, out.transform);
  out.lambda = lambda;
  out.pair = pair;
  return out;
}

struct ReductionResult {
  LssModel reduced_model;
  Index retained = 0;
  Index original_order = 0;
  Vector sigmas;
  Vector discarded_sigmas;
  double apriori_bound = 0.0;
  Matrix lambda1;
  BalancingResult balancing;
};

inline double apriori_bound(const Vector& sigmas, Index r) {
  double s = 0.0;
  for (Index k = r; k < sigmas.size(); ++k) s += sigmas(k);
  return 2.0 * s;
}

/// True when sigma_r and sigma_{r+1} are within relative gap 1e-8.
inline bool tied_at(const Vector& sigmas, Index r, double rel_gap = 1e-8) {
  if (r <= 0 || r >= sigmas.size()) return false;
  return sigmas(r - 1) - sigmas(r) < rel_gap * sigmas(r - 1);
}

/// Keeps the leading r balanced coordinates.
inline ReductionResult truncate(const BalancingResult& bal, Index r, bool force_ties = false) {
  const Index n = bal.balanced_model.n();
  if (r < 1 || r >= n) throw InputError("truncation order must satisfy 1 <= r < n");
  if (!force_ties && tied_at(bal.lambda, r))
    throw InputError("singular values tie at the truncation order; use force to truncate anyway");
  ReductionResult out;
  out.original_order = n;
  out.retained = r;
  out.sigmas = bal.lambda;
  out.discarded_sigmas = bal.lambda.tail(n - r);
  out.apriori_bound = 2.0 * out.discarded_sigmas.sum();
  out.lambda1 = bal.lambda.head(r).asDiagonal();
  out.reduced_model.time_domain = bal.balanced_model.time_domain;
  out.reduced_model.name = bal.balanced_model.name;
  for (const auto& md : bal.balanced_model.modes) {
    out.reduced_model.modes.push_back(
        Mode{md.A.topLeftCorner(r, r), md.B.topRows(r), md.C.leftCols(r)});
  }
  out.balancing = bal;
  return out;
}

enum class GrammianSource { kLmi, kCertificate, kNice, kAveraged };

inline GrammianSource parse_grammian_source(const std::string& s) {
  if (s == "lmi") return GrammianSource::kLmi;
  if (s == "certificate") return GrammianSource::kCertificate;
  if (s == "nice") return GrammianSource::kNice;
  if (s == "averaged") return GrammianSource::kAveraged;
  throw InputError("unknown grammian source: " + s);
}

inline GrammianPair compute_grammians(const LssModel& model, GrammianSource source, const GrammianOptions& opts = {}) {
  switch (source) {
    case GrammianSource::kLmi: return lmi_grammians(model, opts);
    case GrammianSource::kCertificate: return certificate_grammians(model, opts);
    case GrammianSource::kNice: {
      auto pair = nice_grammians(model);
      if (linalg::min_eigenvalue(pair.P) <= 0.0 || linalg::min_eigenvalue(pair.Q) <= 0.0)
        throw InfeasibleError("nice grammians are singular: the model is not minimal");
      return pair;
    }
    case GrammianSource::kAveraged: return averaged_grammians(model, opts);
  }
  throw InputError("unknown grammian source");
}

struct OrderTarget {
  Index r;
};
struct BoundTarget {
  double beta;
};
using ReductionTarget = std::variant<OrderTarget, BoundTarget>;

struct ReduceOptions {
  bool minimize_first = false;
  bool force_ties = false;
  GrammianSource source = GrammianSource::kLmi;
  GrammianOptions grammian;
  std::optional<GrammianPair> pair;  // user-supplied grammians for the (possibly minimized) model
};

/// Smallest admissible order whose bound does not exceed beta. Orders inside
/// a tie are skipped unless forced; r = n means no truncation.
inline Index order_for_bound(const Vector& sigmas, double beta, bool force_ties) {
  const Index n = sigmas.size();
  for (Index r = 1; r < n; ++r) {
    if (apriori_bound(sigmas, r) <= beta && (force_ties || !tied_at(sigmas, r))) return r;
  }
  return n;
}

/// Grammians, balancing and truncation in one call. With r = n the balanced
/// model is returned unchanged with bound 0.
inline ReductionResult reduce(const LssModel& model, const ReductionTarget& target, const ReduceOptions& opts = {}) {
  require_valid(model);
  const LssModel work = opts.minimize_first ? minimize(model) : model;
  if (work.n() == 0) throw InputError("the minimal realization is zero-dimensional; nothing to reduce");
  const GrammianPair pair = opts.pair ? *opts.pair : compute_grammians(work, opts.source, opts.grammian);
  const auto bal = balance(work, pair);
  const Index n = work.n();
  Index r = 0;
  if (const auto* o = std::get_if<OrderTarget>(&target)) {
    r = o->r;
    if (r < 1 || r > n) throw InputError("requested order out of range");
  } else {
    const double beta = std::get<BoundTarget>(target).beta;
    if (!(beta >= 0.0)) throw InputError("bound budget must be nonnegative");
    r = order_for_bound(bal.lambda, beta, opts.force_ties);
  }
  if (r == n) {
    ReductionResult out;
    out.reduced_model = bal.balanced_model;
    out.retained = n;
    out.original_order = model.n();
    out.sigmas = bal.lambda;
    out.discarded_sigmas = Vector(0);
    out.apriori_bound = 0.0;
    out.lambda1 = bal.lambda.asDiagonal();
    out.balancing = bal;
    return out;
  }
  auto out = truncate(bal, r, opts.force_ties);
  out.original_order = model.n();
  return out;
}

}  // namespace lssbalred
