#pragma once

// Switched-system data model: validation, isomorphisms, duality and the
// random stable-model generator.

#include "lssbalred/linalg.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lssbalred {

enum class TimeDomain { kContinuous, kDiscrete };

inline const char* to_string(TimeDomain td) {
  return td == TimeDomain::kContinuous ? "continuous" : "discrete";
}

/// One linear mode (A_q, B_q, C_q).
struct Mode {
  Matrix A;
  Matrix B;
  Matrix C;

  bool operator==(const Mode&) const = default;
};

/// A linear switched system with external switching and zero initial state.
/// Mode indices are 0-based in the library; model files use 1-based indices.
struct LssModel {
  TimeDomain time_domain = TimeDomain::kContinuous;
  std::vector<Mode> modes;
  std::string name;

  Index n() const { return modes.empty() ? 0 : modes.front().A.rows(); }
  Index m() const { return modes.empty() ? 0 : modes.front().B.cols(); }
  Index p() const { return modes.empty() ? 0 : modes.front().C.rows(); }
  Index num_modes() const { return static_cast<Index>(modes.size()); }
  bool discrete() const { return time_domain == TimeDomain::kDiscrete; }

  const Matrix& A(Index q) const { return modes[static_cast<std::size_t>(q)].A; }
  const Matrix& B(Index q) const { return modes[static_cast<std::size_t>(q)].B; }
  const Matrix& C(Index q) const { return modes[static_cast<std::size_t>(q)].C; }

  /// [B_1, ..., B_D], n x (mD).
  Matrix stacked_B() const {
    Matrix out(n(), m() * num_modes());
    for (Index q = 0; q < num_modes(); ++q) out.middleCols(q * m(), m()) = B(q);
    return out;
  }

  /// [C_1; ...; C_D], (pD) x n.
  Matrix stacked_C() const {
    Matrix out(p() * num_modes(), n());
    for (Index q = 0; q < num_modes(); ++q) out.middleRows(q * p(), p()) = C(q);
    return out;
  }

  bool operator==(const LssModel& o) const {
    return time_domain == o.time_domain && modes == o.modes;
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_model(const LssModel& model) {
  ValidationReport report;
  if (model.modes.empty()) {
    report.violations.emplace_back("no modes: D must be at least 1");
    return report;
  }
  const Index n = model.A(0).rows();
  const Index m = model.B(0).cols();
  const Index p = model.C(0).rows();
  if (n < 1) report.violations.emplace_back("state dimension must be positive");
  for (Index q = 0; q < model.num_modes(); ++q) {
    const auto tag = "mode " + std::to_string(q + 1) + ": ";
    const Mode& md = model.modes[static_cast<std::size_t>(q)];
    if (md.A.rows() != n || md.A.cols() != n) report.violations.push_back(tag + "A shape mismatch");
    if (md.B.rows() != n || md.B.cols() != m) report.violations.push_back(tag + "B shape mismatch");
    if (md.C.rows() != p || md.C.cols() != n) report.violations.push_back(tag + "C shape mismatch");
    if (!md.A.allFinite() || !md.B.allFinite() || !md.C.allFinite())
      report.violations.push_back(tag + "non-finite entry");
  }
  return report;
}

inline void require_valid(const LssModel& model) {
  const auto report = validate_model(model);
  if (!report.ok()) {
    std::string msg = "invalid model:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw InputError(msg);
  }
}

inline void require_discrete(const LssModel& model, const char* what) {
  if (!model.discrete()) throw InputError(std::string(what) + " requires a discrete-time model");
}

/// A piecewise-constant switching signal: a dwell list (continuous time) or a
/// finite mode sequence (discrete time). Modes are 0-based.
struct Dwell {
  Index mode = 0;
  double duration = 0.0;
};

class SwitchingSignal {
 public:
  static SwitchingSignal continuous(std::vector<Dwell> dwells) {
    if (dwells.empty()) throw InputError("switching signal must be non-empty");
    for (const auto& d : dwells) {
      if (!(d.duration > 0.0) || !std::isfinite(d.duration))
        throw InputError("dwell durations must be positive and finite");
      if (d.mode < 0) throw InputError("negative mode index in switching signal");
    }
    SwitchingSignal s;
    s.domain_ = TimeDomain::kContinuous;
    s.dwells_ = std::move(dwells);
    return s;
  }

  static SwitchingSignal discrete(std::vector<Index> sequence) {
    if (sequence.empty()) throw InputError("switching signal must be non-empty");
    for (auto q : sequence)
      if (q < 0) throw InputError("negative mode index in switching signal");
    SwitchingSignal s;
    s.domain_ = TimeDomain::kDiscrete;
    s.sequence_ = std::move(sequence);
    return s;
  }

  TimeDomain domain() const { return domain_; }
  const std::vector<Dwell>& dwells() const { return dwells_; }
  const std::vector<Index>& sequence() const { return sequence_; }

  Index max_mode() const {
    Index mx = 0;
    for (const auto& d : dwells_) mx = std::max(mx, d.mode);
    for (auto q : sequence_) mx = std::max(mx, q);
    return mx;
  }

  /// Mode active at discrete time t; the last entry is held beyond the end.
  Index mode_at_step(Index t) const {
    if (sequence_.empty()) throw InputError("not a discrete-time switching signal");
    return sequence_[static_cast<std::size_t>(std::min<Index>(t, static_cast<Index>(sequence_.size()) - 1))];
  }

  bool operator==(const SwitchingSignal& o) const {
    if (domain_ != o.domain_ || sequence_ != o.sequence_ || dwells_.size() != o.dwells_.size())
      return false;
    for (std::size_t i = 0; i < dwells_.size(); ++i)
      if (dwells_[i].mode != o.dwells_[i].mode || dwells_[i].duration != o.dwells_[i].duration)
        return false;
    return true;
  }

 private:
  TimeDomain domain_ = TimeDomain::kDiscrete;
  std::vector<Dwell> dwells_;
  std::vector<Index> sequence_;
};

/// State-space isomorphism S : Sigma_1 -> Sigma_2 with A2 S = S A1.
struct Isomorphism {
  Matrix S;
  double condition_estimate = 1.0;
};

inline Isomorphism make_isomorphism(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0) throw InputError("not an isomorphism: S must be square");
  if (!s.allFinite()) throw InputError("not an isomorphism: non-finite entry");
  Eigen::JacobiSVD<Matrix> svd(s);
  const Vector& sv = svd.singularValues();
  const double tol = static_cast<double>(s.rows()) * sv(0) * 1e-10;
  if (sv(sv.size() - 1) <= tol) throw InputError("not an isomorphism: S is singular");
  return Isomorphism{s, sv(0) / sv(sv.size() - 1)};
}

/// Returns (S A_q S^-1, S B_q, C_q S^-1).
inline LssModel apply_isomorphism(const LssModel& model, const Isomorphism& iso) {
  require_valid(model);
  if (iso.S.rows() != model.n() || iso.S.cols() != model.n())
    throw InputError("isomorphism dimension does not match the model");
  const Isomorphism checked = make_isomorphism(iso.S);
  Eigen::PartialPivLU<Matrix> lu_t(checked.S.transpose());
  LssModel out;
  out.time_domain = model.time_domain;
  out.name = model.name;
  for (const auto& md : model.modes) {
    // X S^-1 = (S^-T X^T)^T
    Matrix a_sinv = lu_t.solve(md.A.transpose()).transpose();
    Matrix c_sinv = lu_t.solve(md.C.transpose()).transpose();
    out.modes.push_back(Mode{checked.S * a_sinv, checked.S * md.B, c_sinv});
  }
  return out;
}

inline Isomorphism inverse(const Isomorphism& iso) {
  return make_isomorphism(iso.S.inverse());
}

/// Dual system (A_q^T, C_q^T, B_q^T).
inline LssModel dual_system(const LssModel& model) {
  LssModel out;
  out.time_domain = model.time_domain;
  out.name = model.name;
  for (const auto& md : model.modes)
    out.modes.push_back(Mode{md.A.transpose(), md.C.transpose(), md.B.transpose()});
  return out;
}

enum class StabilityKind { kQuadratic, kStrong };

struct StableModelSpec {
  TimeDomain time_domain = TimeDomain::kContinuous;
  Index n = 2;
  Index num_modes = 2;
  Index m = 1;
  Index p = 1;
  StabilityKind kind = StabilityKind::kQuadratic;
  /// Target Kronecker spectral radius for kind == kStrong.
  double strong_radius = 0.5;
  /// Spectral norm of each A_q for quadratic discrete-time models.
  double dt_norm = 0.9;
  /// Lower bound on the diagonal damping of continuous-time modes.
  double ct_damping = 0.05;
};

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline Matrix kronecker_stability_matrix(const std::vector<Matrix>& as) {
  const Index n = as.front().rows();
  Matrix k = Matrix::Zero(n * n, n * n);
  for (const auto& a : as) k += linalg::kron(a.transpose(), a.transpose());
  return k;
}

}  // namespace detail

/// Deterministic random model in the requested stability class.
///
/// Continuous quadratic: A_q = K_q - K_q^T - D_q with D_q diagonal >= damping,
/// so P = I certifies stability. Discrete quadratic: random A_q scaled to
/// spectral norm `dt_norm`. Strong (discrete only): random A_q scaled jointly
/// so that rho(sum A_q^T (x) A_q^T) equals `strong_radius`.
inline LssModel random_stable_model(const StableModelSpec& spec, std::uint64_t seed) {
  if (spec.n < 1 || spec.num_modes < 1 || spec.m < 1 || spec.p < 1)
    throw InputError("random_stable_model: dimensions must be positive");
  if (spec.kind == StabilityKind::kStrong && spec.time_domain == TimeDomain::kContinuous)
    throw InputError("random_stable_model: strong stability is a discrete-time notion");
  if (spec.kind == StabilityKind::kStrong && !(spec.strong_radius > 0.0 && spec.strong_radius < 1.0))
    throw InputError("random_stable_model: strong_radius must lie in (0, 1)");
  if (spec.kind == StabilityKind::kQuadratic && spec.time_domain == TimeDomain::kDiscrete &&
      !(spec.dt_norm > 0.0 && spec.dt_norm < 1.0))
    throw InputError("random_stable_model: dt_norm must lie in (0, 1)");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LssModel model;
  model.time_domain = spec.time_domain;
  std::vector<Matrix> as;
  for (Index q = 0; q < spec.num_modes; ++q) {
    Matrix a;
    if (spec.time_domain == TimeDomain::kContinuous) {
      const Matrix k = detail::gaussian_matrix(spec.n, spec.n, rng);
      Vector damping(spec.n);
      for (Index i = 0; i < spec.n; ++i) damping(i) = spec.ct_damping + 2.0 * unif(rng);
      a = k - k.transpose();
      a.diagonal() -= damping;
    } else {
      a = detail::gaussian_matrix(spec.n, spec.n, rng);
      if (spec.kind == StabilityKind::kQuadratic) {
        Eigen::JacobiSVD<Matrix> svd(a);
        const double s = svd.singularValues()(0);
        a *= spec.dt_norm / (s > 0 ? s : 1.0);
      }
    }
    as.push_back(a);
  }
  if (spec.kind == StabilityKind::kStrong) {
    double rho = linalg::spectral_radius(detail::kronecker_stability_matrix(as));
    if (rho <= 0) rho = 1.0;
    const double c = std::sqrt(spec.strong_radius / rho);
    for (auto& a : as) a *= c;
  }
  for (Index q = 0; q < spec.num_modes; ++q) {
    model.modes.push_back(Mode{as[static_cast<std::size_t>(q)],
                               detail::gaussian_matrix(spec.n, spec.m, rng),
                               detail::gaussian_matrix(spec.p, spec.n, rng)});
  }
  return model;
}

/// Example model from the balanced-truncation literature: single mode,
/// n = 3, balanced with Lambda = diag(2, 1, 0.5).
inline LssModel example_one() {
  LssModel model;
  model.time_domain = TimeDomain::kContinuous;
  model.name = "example-1";
  Matrix a(3, 3), b(3, 1), c(1, 3);
  a << -2, 0, 0, 0, -1, 1, 0, 0, -3;
  b << 1, 0, 1;
  c << 1, 1, 0;
  model.modes.push_back(Mode{a, b, c});
  return model;
}

/// Direct sum of two models with the same mode count and I/O dimensions,
/// (diag(A1, A2), [B1; B2], [C1, C2]): the output is the sum of both outputs.
inline LssModel direct_sum(const LssModel& a, const LssModel& b) {
  require_valid(a);
  require_valid(b);
  if (a.num_modes() != b.num_modes() || a.m() != b.m() || a.p() != b.p() ||
      a.time_domain != b.time_domain)
    throw InputError("direct_sum: incompatible models");
  LssModel out;
  out.time_domain = a.time_domain;
  const Index n1 = a.n(), n2 = b.n();
  for (Index q = 0; q < a.num_modes(); ++q) {
    Matrix aa = Matrix::Zero(n1 + n2, n1 + n2);
    aa.topLeftCorner(n1, n1) = a.A(q);
    aa.bottomRightCorner(n2, n2) = b.A(q);
    Matrix bb(n1 + n2, a.m());
    bb << a.B(q), b.B(q);
    Matrix cc(a.p(), n1 + n2);
    cc << a.C(q), b.C(q);
    out.modes.push_back(Mode{aa, bb, cc});
  }
  return out;
}

}  // namespace lssbalred
