#pragma once

// Quadratic stability certificates and strong (Kronecker) stability.

#include "lssbalred/families.hpp"
#include "lssbalred/lmi.hpp"
#include "lssbalred/model.hpp"

#include <optional>

namespace lssbalred {

enum class CertificateKind { kQuadraticCt, kQuadraticDt };

struct StabilityCertificate {
  Matrix P;
  double margin = 0.0;
  CertificateKind kind = CertificateKind::kQuadraticCt;
  std::vector<double> residuals;
  int iterations = 0;
};

struct StrongStabilityReport {
  double kronecker_spectral_radius = 0.0;
  bool stable = false;
  Index matrix_dimension = 0;
};

struct StabilityOptions {
  double margin = -1.0;  // negative: default margin for the model
  lmi::SolverOptions solver;
};

/// Searches for a common quadratic Lyapunov function. An empty result means
/// the solver gave up, which does not prove instability.
inline std::optional<StabilityCertificate> check_quadratic_stability(const LssModel& model,
                                                                     StabilityOptions opts = {}) {
  require_valid(model);
  const double margin = opts.margin > 0 ? opts.margin : families::default_margin(model);
  const auto sys = families::system(model, families::SetKind::kStability, margin);
  const auto res = lmi::solve_feasibility(sys, opts.solver);
  if (!res.feasible()) return std::nullopt;
  StabilityCertificate cert;
  cert.P = linalg::symmetrize(res.solution);
  cert.margin = margin;
  cert.kind = model.discrete() ? CertificateKind::kQuadraticDt : CertificateKind::kQuadraticCt;
  cert.residuals = families::membership(model, cert.P, families::SetKind::kStability).residuals;
  cert.iterations = res.iterations;
  return cert;
}

namespace detail {

/// Spectral radius of X -> sum_q A_q^T X A_q by power iteration on the PSD
/// cone, where the dominant eigenvector lives. Avoids forming the n^2 x n^2
/// matrix.
inline double cone_spectral_radius(const LssModel& model, int max_iter = 100000, double tol = 1e-10) {
  const Index n = model.n();
  Matrix x = Matrix::Identity(n, n) / std::sqrt(static_cast<double>(n));
  double estimate = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    Matrix y = Matrix::Zero(n, n);
    for (Index q = 0; q < model.num_modes(); ++q) y += model.A(q).transpose() * x * model.A(q);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    if (std::abs(norm - estimate) <= tol * std::max(1.0, norm)) return norm;
    estimate = norm;
  }
  return estimate;
}

inline std::vector<Matrix> mode_matrices(const LssModel& model) {
  std::vector<Matrix> as;
  for (const auto& md : model.modes) as.push_back(md.A);
  return as;
}

}  // namespace detail

/// rho(sum_q A_q^T (x) A_q^T); stable iff below one. Dense eigenvalues for
/// n <= 50, cone power iteration beyond.
inline StrongStabilityReport check_strong_stability(const LssModel& model) {
  require_valid(model);
  if (!model.discrete()) throw InputError("strong stability is a discrete-time notion");
  StrongStabilityReport r;
  const Index n = model.n();
  r.matrix_dimension = n * n;
  r.kronecker_spectral_radius = n <= 50
      ? linalg::spectral_radius(detail::kronecker_stability_matrix(detail::mode_matrices(model)))
      : detail::cone_spectral_radius(model);
  r.stable = r.kronecker_spectral_radius < 1.0;
  return r;
}

/// Solves P = sum_q A_q^T P A_q + I. For a strongly stable model P is a
/// discrete-time quadratic stability certificate with margin at least one.
inline StabilityCertificate strong_implies_quadratic_witness(const LssModel& model) {
  const auto report = check_strong_stability(model);
  if (!report.stable) throw InputError("model is not strongly stable");
  const Index n = model.n();
  const Matrix k = detail::kronecker_stability_matrix(detail::mode_matrices(model));
  const Matrix lhs = Matrix::Identity(n * n, n * n) - k;
  const Vector rhs = linalg::vec(Matrix::Identity(n, n));
  const Matrix p = linalg::symmetrize(linalg::unvec(lhs.partialPivLu().solve(rhs), n, n));
  Matrix fixed = Matrix::Identity(n, n) - p;
  for (Index q = 0; q < model.num_modes(); ++q) fixed += model.A(q).transpose() * p * model.A(q);
  if (fixed.cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, p.cwiseAbs().maxCoeff()))
    throw InfeasibleError("Kronecker solve residual too large");
  StabilityCertificate cert;
  cert.P = p;
  cert.kind = CertificateKind::kQuadraticDt;
  cert.residuals = families::membership(model, p, families::SetKind::kStability).residuals;
  double worst = -std::numeric_limits<double>::infinity();
  for (double e : cert.residuals) worst = std::max(worst, e);
  cert.margin = -worst;
  return cert;
}

}  // namespace lssbalred
