#pragma once

// Feasibility solver for simultaneous affine LMIs in one symmetric matrix
// variable P:
//
//     F_i(P) <= -margin * I   for every constraint i,     P >= margin * I,
//
// where F_i(P) = C_i + sum_j w_ij * (L_ij P R_ij [+ transpose]).
//
// Two engines are provided. Alternating projections between the affine graph
// {(P, S_i) : S_i = -F_i(P)} and the product of shifted PSD cones is cheap and
// handles well-conditioned problems; a log-barrier phase-I method (maximize t
// subject to P - tI >= 0, -F_i(P) - tI >= 0) takes over when projections stall
// near the boundary of the feasible set. Neither claims a certificate of
// infeasibility.

#include "lssbalred/linalg.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lssbalred::lmi {

/// weight * (left * P * right), plus its transpose when `symmetrize` is set.
struct LmiTerm {
  Matrix left;
  Matrix right;
  double weight = 1.0;
  bool symmetrize = true;
};

struct LmiConstraint {
  std::string label;
  Matrix constant;
  std::vector<LmiTerm> terms;

  Index size() const { return constant.rows(); }
};

struct AffineLmiSystem {
  Index n = 0;
  std::vector<LmiConstraint> constraints;
  double margin = 1e-7;

  Matrix evaluate(std::size_t i, const Matrix& p) const {
    const LmiConstraint& c = constraints.at(i);
    Matrix out = c.constant;
    for (const auto& t : c.terms) {
      const Matrix lpr = t.left * p * t.right;
      if (t.symmetrize) {
        out += t.weight * (lpr + lpr.transpose());
      } else {
        out += t.weight * lpr;
      }
    }
    return out;
  }

  /// Largest eigenvalue over all constraints at P.
  double residual(const Matrix& p) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < constraints.size(); ++i)
      worst = std::max(worst, linalg::max_eigenvalue(evaluate(i, p)));
    return worst;
  }

  bool satisfied_by(const Matrix& p, double slack = 1e-8) const {
    if (p.rows() != n || p.cols() != n || !p.allFinite()) return false;
    if (linalg::min_eigenvalue(p) < margin - 1e-9) return false;
    return residual(p) <= -margin + slack;
  }

  /// Throws InputError on shape errors or maps that do not preserve symmetry.
  void validate() const {
    if (n < 1) throw InputError("LMI system: variable dimension must be positive");
    if (!(margin >= 0.0)) throw InputError("LMI system: margin must be nonnegative");
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix probe(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) probe(i, j) = normal(rng);
    probe = linalg::symmetrize(probe);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const LmiConstraint& c = constraints[i];
      const Index k = c.size();
      if (c.constant.cols() != k) throw InputError("LMI constraint " + c.label + ": constant not square");
      for (const auto& t : c.terms) {
        if (t.left.rows() != k || t.left.cols() != n || t.right.rows() != n || t.right.cols() != k)
          throw InputError("LMI constraint " + c.label + ": term shape mismatch");
      }
      const Matrix f = evaluate(i, probe);
      const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
      if ((f - f.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError("LMI constraint " + c.label + ": map does not preserve symmetry");
    }
  }
};

enum class FeasibilityStatus { kFeasible, kInfeasibleWithinBudget };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::kInfeasibleWithinBudget;
  Matrix solution;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;

  bool feasible() const { return status == FeasibilityStatus::kFeasible; }
};

enum class Method { kAuto, kAlternatingProjections, kInteriorPoint };

struct SolverOptions {
  int budget = 5000;
  Method method = Method::kAuto;
  /// Iterations spent on projections before kAuto switches to the barrier method.
  int projection_iterations = 300;
  std::optional<Matrix> warm_start;
  std::function<void(int, double)> on_progress;
};

/// Frobenius-nearest symmetric matrix with all eigenvalues >= floor.
inline Matrix project_psd(const Matrix& m, double floor) {
  if (!linalg::is_symmetric(m, 1e-10)) throw InputError("project_psd: input is not symmetric");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(m));
  const Vector clipped = es.eigenvalues().cwiseMax(floor);
  return linalg::symmetrize(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

namespace detail {

struct Block {
  Index size = 0;
  Vector c;  // svec of the constant term
  Matrix M;  // svec(F(P)) = c + M * svec(P)
};

struct Compiled {
  Index n = 0;
  Index dim = 0;  // svec dimension of P
  std::vector<Block> blocks;
  double scale = 1.0;
};

inline Matrix homogeneous_part(const LmiConstraint& c, const Matrix& p) {
  Matrix out = Matrix::Zero(c.size(), c.size());
  for (const auto& t : c.terms) {
    const Matrix lpr = t.left * p * t.right;
    if (t.symmetrize) {
      out += t.weight * (lpr + lpr.transpose());
    } else {
      out += t.weight * lpr;
    }
  }
  return out;
}

inline Block compile_constraint(const LmiConstraint& c, Index n) {
  const Index dim = linalg::svec_size(n);
  Block b;
  b.size = c.size();
  b.c = linalg::svec(linalg::symmetrize(c.constant));
  b.M.resize(linalg::svec_size(b.size), dim);
  Vector e = Vector::Zero(dim);
  for (Index k = 0; k < dim; ++k) {
    e.setZero();
    e(k) = 1.0;
    b.M.col(k) = linalg::svec(linalg::symmetrize(homogeneous_part(c, linalg::smat(e, n))));
  }
  return b;
}

inline Compiled compile(const AffineLmiSystem& sys) {
  Compiled out;
  out.n = sys.n;
  out.dim = linalg::svec_size(sys.n);
  double scale = 1.0;
  for (const auto& c : sys.constraints) {
    out.blocks.push_back(compile_constraint(c, sys.n));
    scale = std::max({scale, out.blocks.back().c.cwiseAbs().maxCoeff(),
                      out.blocks.back().M.cwiseAbs().maxCoeff()});
  }
  out.scale = scale;
  return out;
}

inline Vector svec_identity(Index k) { return linalg::svec(Matrix::Identity(k, k)); }

/// Smallest eigenvalue over the slack blocks -F_i(P) and P itself.
inline double min_slack(const Compiled& cp, const Vector& p) {
  double worst = linalg::min_eigenvalue(linalg::smat(p, cp.n));
  for (const auto& b : cp.blocks) {
    if (b.size == 0) continue;
    worst = std::min(worst, linalg::min_eigenvalue(linalg::smat(-(b.c + b.M * p), b.size)));
  }
  return worst;
}

inline double max_residual(const Compiled& cp, const Vector& p) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : cp.blocks) {
    if (b.size == 0) continue;
    worst = std::max(worst, linalg::max_eigenvalue(linalg::smat(b.c + b.M * p, b.size)));
  }
  return worst;
}

struct RunState {
  Vector p;
  int iterations = 0;
  bool found = false;
};

inline bool meets_margin(const Compiled& cp, const Vector& p, double margin) {
  return p.allFinite() && min_slack(cp, p) >= margin;
}

inline void alternating_projections(const Compiled& cp, double margin, int budget,
                                    const std::function<void(int, double)>& progress, RunState& st) {
  const Index dim = cp.dim;
  Matrix normal = Matrix::Identity(dim, dim);
  for (const auto& b : cp.blocks) normal += b.M.transpose() * b.M;
  Eigen::LLT<Matrix> llt(normal);
  const double floor = 2.0 * margin + 1e-6 * cp.scale;
  std::vector<Vector> s(cp.blocks.size());
  for (std::size_t i = 0; i < cp.blocks.size(); ++i) s[i] = -(cp.blocks[i].c + cp.blocks[i].M * st.p);
  for (int it = 0; it < budget; ++it) {
    ++st.iterations;
    const Vector p_hat = linalg::svec(project_psd(linalg::smat(st.p, cp.n), floor));
    Vector rhs = p_hat;
    for (std::size_t i = 0; i < cp.blocks.size(); ++i) {
      const auto& b = cp.blocks[i];
      if (b.size == 0) continue;
      const Vector s_hat = linalg::svec(project_psd(linalg::smat(s[i], b.size), floor));
      rhs -= b.M.transpose() * (b.c + s_hat);
    }
    st.p = llt.solve(rhs);
    for (std::size_t i = 0; i < cp.blocks.size(); ++i) s[i] = -(cp.blocks[i].c + cp.blocks[i].M * st.p);
    if (progress) progress(st.iterations, max_residual(cp, st.p));
    if (meets_margin(cp, st.p, margin)) {
      st.found = true;
      return;
    }
  }
}

/// Phase-I barrier method on z = (svec(P), t).
inline void interior_point(const Compiled& cp, double margin, int budget,
                           const std::function<void(int, double)>& progress, RunState& st) {
  const Index dim = cp.dim;
  const Index nz = dim + 1;
  struct BarrierBlock {
    Index size;
    Vector a;
    Matrix G;
  };
  std::vector<BarrierBlock> bb;
  {
    Matrix g(dim, nz);
    g.leftCols(dim) = Matrix::Identity(dim, dim);
    g.col(dim) = -svec_identity(cp.n);
    bb.push_back({cp.n, Vector::Zero(dim), g});
  }
  double nu = static_cast<double>(cp.n);
  for (const auto& b : cp.blocks) {
    if (b.size == 0) continue;
    Matrix g(b.M.rows(), nz);
    g.leftCols(dim) = -b.M;
    g.col(dim) = -svec_identity(b.size);
    bb.push_back({b.size, -b.c, g});
    nu += static_cast<double>(b.size);
  }

  const double mu0 = min_slack(cp, st.p);
  if (mu0 >= margin) {
    st.found = true;
    return;
  }
  Vector z(nz);
  z.head(dim) = st.p;
  z(dim) = mu0 - 0.1 * std::max({std::abs(mu0), 10.0 * margin, 1e-12 * cp.scale}) - 1e-300;

  // Returns +inf when some block is not positive definite.
  auto barrier = [&](const Vector& zz, double s) {
    double val = -s * zz(dim);
    for (const auto& b : bb) {
      Eigen::LLT<Matrix> llt(linalg::smat(b.a + b.G * zz, b.size));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Vector d = Eigen::Map<const Matrix>(llt.matrixLLT().data(), b.size, b.size).diagonal();
      if ((d.array() <= 0).any()) return std::numeric_limits<double>::infinity();
      val -= 2.0 * d.array().log().sum();
    }
    return val;
  };

  double s = 1.0 / std::max({std::abs(z(dim)), margin, 1e-12});
  s = std::max(s, 1e-6);
  while (st.iterations < budget) {
    // Centering.
    for (int inner = 0; inner < 100 && st.iterations < budget; ++inner) {
      Vector grad = Vector::Zero(nz);
      grad(dim) = -s;
      Matrix hess = Matrix::Zero(nz, nz);
      bool ok = true;
      for (const auto& b : bb) {
        const Matrix x = linalg::smat(b.a + b.G * z, b.size);
        Eigen::LLT<Matrix> llt(x);
        if (llt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        const Matrix xinv = llt.solve(Matrix::Identity(b.size, b.size));
        grad -= b.G.transpose() * linalg::svec(linalg::symmetrize(xinv));
        Matrix hg(b.G.rows(), nz);
        for (Index k = 0; k < nz; ++k)
          hg.col(k) = linalg::svec(linalg::symmetrize(xinv * linalg::smat(b.G.col(k), b.size) * xinv));
        hess.noalias() += b.G.transpose() * hg;
      }
      if (!ok) return;
      hess = linalg::symmetrize(hess);
      hess.diagonal().array() += 1e-14 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      const Vector dz = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dz);
      ++st.iterations;
      if (!dz.allFinite()) return;
      if (decrement < 1e-10) break;
      const double f0 = barrier(z, s);
      double alpha = 1.0;
      Vector trial = z + dz;
      double f1 = barrier(trial, s);
      while (!(f1 <= f0 - 0.25 * alpha * decrement) && alpha > 1e-12) {
        alpha *= 0.5;
        trial = z + alpha * dz;
        f1 = barrier(trial, s);
      }
      if (!(f1 < std::numeric_limits<double>::infinity())) break;
      z = trial;
      st.p = z.head(dim);
      if (progress) progress(st.iterations, max_residual(cp, st.p));
      if (z(dim) >= margin && meets_margin(cp, st.p, margin)) {
        st.found = true;
        return;
      }
      if (alpha <= 1e-12) break;
    }
    // The optimal t is at most t + nu / s at the central point.
    if (z(dim) + 2.0 * nu / s < margin) return;
    s *= 10.0;
    if (s > 1e20) return;
  }
}

inline FeasibilityResult finish(const AffineLmiSystem& sys, const Compiled& cp, const RunState& st) {
  FeasibilityResult r;
  r.iterations = st.iterations;
  r.solution = linalg::smat(st.p, cp.n);
  r.residual = sys.residual(r.solution);
  r.status = (st.found && sys.satisfied_by(r.solution)) ? FeasibilityStatus::kFeasible
                                                         : FeasibilityStatus::kInfeasibleWithinBudget;
  return r;
}

inline FeasibilityResult solve_compiled(const AffineLmiSystem& sys, const Compiled& cp,
                                        const SolverOptions& opts) {
  RunState st;
  if (opts.warm_start && opts.warm_start->rows() == sys.n && opts.warm_start->cols() == sys.n &&
      opts.warm_start->allFinite()) {
    st.p = linalg::svec(linalg::symmetrize(*opts.warm_start));
  } else {
    st.p = svec_identity(sys.n);
  }
  if (meets_margin(cp, st.p, sys.margin)) {
    st.found = true;
    return finish(sys, cp, st);
  }
  const int budget = std::max(1, opts.budget);
  if (opts.method == Method::kAlternatingProjections) {
    alternating_projections(cp, sys.margin, budget, opts.on_progress, st);
  } else if (opts.method == Method::kInteriorPoint) {
    interior_point(cp, sys.margin, budget, opts.on_progress, st);
  } else {
    const Vector start = st.p;
    alternating_projections(cp, sys.margin, std::min(budget / 2, opts.projection_iterations),
                            opts.on_progress, st);
    if (!st.found) {
      // Restart the barrier method from the better of the two points.
      if (!(min_slack(cp, st.p) > min_slack(cp, start))) st.p = start;
      interior_point(cp, sys.margin, budget, opts.on_progress, st);
    }
  }
  return finish(sys, cp, st);
}

}  // namespace detail

inline FeasibilityResult solve_feasibility(const AffineLmiSystem& sys, const SolverOptions& opts = {}) {
  sys.validate();
  const auto cp = detail::compile(sys);
  return detail::solve_compiled(sys, cp, opts);
}

/// Constraint tr(P) - cap <= -margin as a 1 x 1 block.
inline LmiConstraint trace_cap_constraint(Index n, double cap) {
  LmiConstraint c;
  c.label = "trace cap";
  c.constant = Matrix::Constant(1, 1, -cap);
  for (Index i = 0; i < n; ++i) {
    LmiTerm t;
    t.left = Matrix::Zero(1, n);
    t.left(0, i) = 1.0;
    t.right = t.left.transpose();
    t.weight = 0.5;
    c.terms.push_back(std::move(t));
  }
  return c;
}

/// Bisection on a trace cap, re-solving feasibility at each cap. Returns a
/// feasible matrix with trace <= trace(seed); the seed itself if no
/// improvement is found.
inline Matrix tighten_trace(const AffineLmiSystem& sys, const Matrix& seed, double rel_tol = 1e-6,
                            SolverOptions opts = {}) {
  sys.validate();
  if (!sys.satisfied_by(seed)) throw InputError("tighten_trace: seed is not feasible");
  AffineLmiSystem capped = sys;
  capped.constraints.push_back(trace_cap_constraint(sys.n, seed.trace()));
  auto cp = detail::compile(capped);
  Matrix best = seed;
  double hi = seed.trace();
  double lo = static_cast<double>(sys.n) * sys.margin;
  for (int it = 0; it < 60 && hi - lo > rel_tol * std::max(hi, 1e-300); ++it) {
    const double cap = 0.5 * (lo + hi);
    capped.constraints.back().constant(0, 0) = -cap;
    cp.blocks.back().c(0) = -cap;
    opts.warm_start = best;
    const auto r = detail::solve_compiled(capped, cp, opts);
    if (r.feasible() && sys.satisfied_by(r.solution) && r.solution.trace() <= hi) {
      best = linalg::symmetrize(r.solution);
      hi = best.trace();
    } else {
      lo = cap;
    }
  }
  return best;
}

/// Both forms of the Schur-complement equivalence for the Lyapunov (ct) or
/// Stein (dt) inequality must agree in sign:
///   ct: A^T P + P A + S^T S   vs  [[P^-1 A^T + A P^-1, P^-1 S^T], [S P^-1, -I]]
///   dt: A^T P A - P + S^T S   vs  [[-P^-1 + A P^-1 A^T, -A P^-1 S^T],
///                                  [-S P^-1 A^T, -I + S P^-1 S^T]]
inline bool schur_equivalence_check(const Matrix& a, const Matrix& p, const Matrix& s, bool discrete) {
  const Index n = a.rows();
  const Index k = s.rows();
  Eigen::LLT<Matrix> llt(linalg::symmetrize(p));
  if (llt.info() != Eigen::Success) throw InputError("schur_equivalence_check: P is not positive definite");
  const Matrix pinv = llt.solve(Matrix::Identity(n, n));
  Matrix form;
  Matrix block(n + k, n + k);
  if (!discrete) {
    form = a.transpose() * p + p * a + s.transpose() * s;
    block << pinv * a.transpose() + a * pinv, pinv * s.transpose(), s * pinv, -Matrix::Identity(k, k);
  } else {
    form = a.transpose() * p * a - p + s.transpose() * s;
    block << -pinv + a * pinv * a.transpose(), -a * pinv * s.transpose(), -s * pinv * a.transpose(),
        -Matrix::Identity(k, k) + s * pinv * s.transpose();
  }
  const bool neg1 = linalg::max_eigenvalue(form) < 0;
  const bool neg2 = linalg::max_eigenvalue(block) < 0;
  return neg1 == neg2;
}

}  // namespace lssbalred::lmi
