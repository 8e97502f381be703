#pragma once

// Constraint families: quadratic stability (S), observability (O),
// controllability (C), the bounded-real block G_gamma, and the summed
// ("averaged") discrete-time inequalities. Each has a residual evaluator and
// a builder for the LMI solver.

#include "lssbalred/lmi.hpp"
#include "lssbalred/model.hpp"

#include <vector>

namespace lssbalred::families {

enum class SetKind { kStability, kObservability, kControllability, kGain };

inline const char* to_string(SetKind k) {
  switch (k) {
    case SetKind::kStability: return "S";
    case SetKind::kObservability: return "O";
    case SetKind::kControllability: return "C";
    case SetKind::kGain: return "G_gamma";
  }
  return "?";
}

/// Residual matrix of mode q for set `kind` at X. gamma is used by kGain only.
inline Matrix residual(const LssModel& model, Index q, const Matrix& x, SetKind kind, double gamma = 0.0) {
  const Matrix& a = model.A(q);
  const Matrix& b = model.B(q);
  const Matrix& c = model.C(q);
  const bool dt = model.discrete();
  switch (kind) {
    case SetKind::kStability:
      return dt ? Matrix(a.transpose() * x * a - x) : Matrix(a.transpose() * x + x * a);
    case SetKind::kObservability:
      return dt ? Matrix(a.transpose() * x * a - x + c.transpose() * c)
                : Matrix(a.transpose() * x + x * a + c.transpose() * c);
    case SetKind::kControllability:
      return dt ? Matrix(a * x * a.transpose() - x + b * b.transpose())
                : Matrix(a * x + x * a.transpose() + b * b.transpose());
    case SetKind::kGain: {
      const Index n = model.n();
      const Index m = model.m();
      Matrix g(n + m, n + m);
      if (dt) {
        g.topLeftCorner(n, n) = a.transpose() * x * a + c.transpose() * c - x;
        g.topRightCorner(n, m) = a.transpose() * x * b;
        g.bottomRightCorner(m, m) = b.transpose() * x * b - gamma * gamma * Matrix::Identity(m, m);
      } else {
        g.topLeftCorner(n, n) = a.transpose() * x + x * a + c.transpose() * c;
        g.topRightCorner(n, m) = x * b;
        g.bottomRightCorner(m, m) = -gamma * gamma * Matrix::Identity(m, m);
      }
      g.bottomLeftCorner(m, n) = g.topRightCorner(n, m).transpose();
      return linalg::symmetrize(g);
    }
  }
  throw InputError("unknown set kind");
}

/// sum_q (A_q X A_q^T + B_q B_q^T) - X  (controllability) or
/// sum_q (A_q^T X A_q + C_q^T C_q) - X  (observability).
inline Matrix averaged_residual(const LssModel& model, const Matrix& x, SetKind kind) {
  Matrix r = -x;
  for (Index q = 0; q < model.num_modes(); ++q) {
    const Matrix& a = model.A(q);
    if (kind == SetKind::kControllability) {
      r += a * x * a.transpose() + model.B(q) * model.B(q).transpose();
    } else if (kind == SetKind::kObservability) {
      r += a.transpose() * x * a + model.C(q).transpose() * model.C(q);
    } else {
      throw InputError("averaged residual is defined for O and C only");
    }
  }
  return linalg::symmetrize(r);
}

/// Per-mode largest residual eigenvalues.
struct MembershipReport {
  SetKind kind = SetKind::kStability;
  double gamma = 0.0;
  std::vector<double> residuals;
  double worst = -std::numeric_limits<double>::infinity();
  bool positive_definite = false;

  bool member() const { return positive_definite && worst <= 0.0; }
  bool strict_member(double margin) const { return positive_definite && worst <= -margin; }
};

inline MembershipReport membership(const LssModel& model, const Matrix& x, SetKind kind, double gamma = 0.0) {
  if (x.rows() != model.n() || x.cols() != model.n()) throw InputError("membership: matrix has wrong size");
  MembershipReport r;
  r.kind = kind;
  r.gamma = gamma;
  r.positive_definite = linalg::is_symmetric(x, 1e-8) && linalg::min_eigenvalue(x) > 0.0;
  for (Index q = 0; q < model.num_modes(); ++q) {
    const double e = linalg::max_eigenvalue(residual(model, q, linalg::symmetrize(x), kind, gamma));
    r.residuals.push_back(e);
    r.worst = std::max(r.worst, e);
  }
  return r;
}

/// Default strictness margin, 1e-7 times the data scale.
inline double default_margin(const LssModel& model) {
  double s = 1.0;
  for (const auto& md : model.modes) {
    s = std::max(s, md.A.cwiseAbs().maxCoeff());
    if (md.B.size()) s = std::max(s, md.B.squaredNorm());
    if (md.C.size()) s = std::max(s, md.C.squaredNorm());
  }
  return 1e-7 * s;
}

namespace detail {

inline lmi::LmiTerm term(Matrix left, Matrix right, double weight) {
  return lmi::LmiTerm{std::move(left), std::move(right), weight, true};
}

}  // namespace detail

inline lmi::LmiConstraint constraint(const LssModel& model, Index q, SetKind kind, double gamma = 0.0) {
  const Index n = model.n();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix& a = model.A(q);
  const Matrix& b = model.B(q);
  const Matrix& c = model.C(q);
  const bool dt = model.discrete();
  lmi::LmiConstraint out;
  out.label = std::string(to_string(kind)) + " mode " + std::to_string(q + 1);
  switch (kind) {
    case SetKind::kStability:
    case SetKind::kObservability:
      out.constant = kind == SetKind::kObservability ? Matrix(c.transpose() * c) : Matrix::Zero(n, n);
      if (dt) {
        out.terms.push_back(detail::term(a.transpose(), a, 0.5));
        out.terms.push_back(detail::term(I, I, -0.5));
      } else {
        out.terms.push_back(detail::term(a.transpose(), I, 1.0));
      }
      break;
    case SetKind::kControllability:
      out.constant = b * b.transpose();
      if (dt) {
        out.terms.push_back(detail::term(a, a.transpose(), 0.5));
        out.terms.push_back(detail::term(I, I, -0.5));
      } else {
        out.terms.push_back(detail::term(a, I, 1.0));
      }
      break;
    case SetKind::kGain: {
      const Index m = model.m();
      out.constant = Matrix::Zero(n + m, n + m);
      out.constant.topLeftCorner(n, n) = c.transpose() * c;
      out.constant.bottomRightCorner(m, m) = -gamma * gamma * Matrix::Identity(m, m);
      Matrix left(n + m, n);
      left << a.transpose(), b.transpose();
      Matrix top = Matrix::Zero(n + m, n);
      top.topRows(n) = I;
      if (dt) {
        Matrix right(n, n + m);
        right << a, b;
        out.terms.push_back(detail::term(left, right, 0.5));
        out.terms.push_back(detail::term(top, top.transpose(), -0.5));
      } else {
        out.terms.push_back(detail::term(left, top.transpose(), 1.0));
      }
      break;
    }
  }
  return out;
}

/// One constraint per mode.
inline lmi::AffineLmiSystem system(const LssModel& model, SetKind kind, double margin, double gamma = 0.0) {
  lmi::AffineLmiSystem sys;
  sys.n = model.n();
  sys.margin = margin;
  for (Index q = 0; q < model.num_modes(); ++q) sys.constraints.push_back(constraint(model, q, kind, gamma));
  return sys;
}

/// Single summed constraint; discrete time only.
inline lmi::AffineLmiSystem averaged_system(const LssModel& model, SetKind kind, double margin) {
  require_discrete(model, "averaged grammians");
  const Index n = model.n();
  const Matrix I = Matrix::Identity(n, n);
  lmi::AffineLmiSystem sys;
  sys.n = n;
  sys.margin = margin;
  lmi::LmiConstraint c;
  c.label = std::string("averaged ") + to_string(kind);
  c.constant = Matrix::Zero(n, n);
  for (Index q = 0; q < model.num_modes(); ++q) {
    const Matrix& a = model.A(q);
    if (kind == SetKind::kControllability) {
      c.constant += model.B(q) * model.B(q).transpose();
      c.terms.push_back(detail::term(a, a.transpose(), 0.5));
    } else if (kind == SetKind::kObservability) {
      c.constant += model.C(q).transpose() * model.C(q);
      c.terms.push_back(detail::term(a.transpose(), a, 0.5));
    } else {
      throw InputError("averaged system is defined for O and C only");
    }
  }
  c.terms.push_back(detail::term(I, I, -0.5));
  sys.constraints.push_back(std::move(c));
  return sys;
}

}  // namespace lssbalred::families
