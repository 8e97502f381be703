#pragma once

// Reachability and observability subspaces, reduction to minimal form,
// Markov parameters and Hankel blocks.

#include "lssbalred/model.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace lssbalred {

/// A word over the modes, 0-based, applied left to right: A_w = A_{w_k} ... A_{w_1}.
using Word = std::vector<Index>;

enum class SubspaceKind { kReachableImage, kUnobservableKernel };

struct SubspaceBasis {
  Matrix basis;  // n x r, orthonormal columns
  SubspaceKind kind = SubspaceKind::kReachableImage;
  int iterations = 0;

  Index dimension() const { return basis.cols(); }
};

/// Image of the reachability matrix by subspace iteration
/// V_0 = span{B_q}, V_{k+1} = V_k + sum_q A_q V_k.
inline SubspaceBasis reachable_subspace(const LssModel& model) {
  if (model.num_modes() > 0 && model.n() == 0) return SubspaceBasis{Matrix(0, 0), SubspaceKind::kReachableImage, 0};
  require_valid(model);
  const Index n = model.n();
  const Matrix seed = model.stacked_B();
  SubspaceBasis out;
  out.kind = SubspaceKind::kReachableImage;
  out.basis = linalg::range_basis(seed);
  while (out.basis.cols() > 0 && out.basis.cols() < n) {
    const Index r = out.basis.cols();
    Matrix stacked(n, r * (model.num_modes() + 1));
    stacked.leftCols(r) = out.basis;
    for (Index q = 0; q < model.num_modes(); ++q) stacked.middleCols(r * (q + 1), r) = model.A(q) * out.basis;
    Matrix next = linalg::range_basis(stacked);
    ++out.iterations;
    if (next.cols() <= r) break;
    out.basis = std::move(next);
  }
  return out;
}

/// Kernel of the observability matrix, as the orthogonal complement of the
/// reachable subspace of the dual system.
inline SubspaceBasis unobservable_subspace(const LssModel& model) {
  const SubspaceBasis dual = reachable_subspace(dual_system(model));
  SubspaceBasis out;
  out.kind = SubspaceKind::kUnobservableKernel;
  out.iterations = dual.iterations;
  out.basis = linalg::orthogonal_complement(dual.basis, model.n());
  return out;
}

namespace detail {

/// Restriction to the leading r coordinates after the orthogonal change of
/// basis x = T z.
inline LssModel restrict_leading(const LssModel& model, const Matrix& t, Index r) {
  LssModel out;
  out.time_domain = model.time_domain;
  out.name = model.name;
  const Matrix tr = t.leftCols(r);
  for (const auto& md : model.modes) {
    out.modes.push_back(Mode{tr.transpose() * md.A * tr, tr.transpose() * md.B, md.C * tr});
  }
  return out;
}

}  // namespace detail

/// Restricts the model to its reachable subspace. The returned basis is the
/// n x r matrix V with x = V z on the reachable part.
inline std::pair<LssModel, SubspaceBasis> reachability_reduction(const LssModel& model) {
  SubspaceBasis v = reachable_subspace(model);
  const Matrix t = linalg::complete_basis(v.basis, model.n());
  return {detail::restrict_leading(model, t, v.dimension()), std::move(v)};
}

/// Restricts the model to the orthogonal complement of its unobservable
/// subspace. The returned basis spans that kernel.
inline std::pair<LssModel, SubspaceBasis> observability_reduction(const LssModel& model) {
  const SubspaceBasis observable = reachable_subspace(dual_system(model));
  const Matrix t = linalg::complete_basis(observable.basis, model.n());
  SubspaceBasis kernel;
  kernel.kind = SubspaceKind::kUnobservableKernel;
  kernel.iterations = observable.iterations;
  kernel.basis = t.rightCols(model.n() - observable.dimension());
  return {detail::restrict_leading(model, t, observable.dimension()), std::move(kernel)};
}

/// Reachability reduction followed by observability reduction.
inline LssModel minimize(const LssModel& model) {
  auto reached = reachability_reduction(model).first;
  if (reached.n() == 0) return reached;
  return observability_reduction(reached).first;
}

inline bool is_span_reachable(const LssModel& model) {
  return reachable_subspace(model).dimension() == model.n();
}

inline bool is_observable(const LssModel& model) {
  return unobservable_subspace(model).dimension() == 0;
}

inline bool is_minimal(const LssModel& model) { return is_span_reachable(model) && is_observable(model); }

inline void check_word(const LssModel& model, const Word& w) {
  for (auto q : w)
    if (q < 0 || q >= model.num_modes())
      throw InputError("invalid mode index " + std::to_string(q + 1) + " in word");
}

/// A_w = A_{w_k} ... A_{w_1}; identity for the empty word.
inline Matrix word_product(const LssModel& model, const Word& w) {
  check_word(model, w);
  Matrix a = Matrix::Identity(model.n(), model.n());
  for (auto q : w) a = model.A(q) * a;
  return a;
}

/// M_v = C~ A_v B~, of size (pD) x (mD).
inline Matrix markov_parameter(const LssModel& model, const Word& v) {
  return model.stacked_C() * (word_product(model, v) * model.stacked_B());
}

/// H_{s,v} = M_{vs}: the word v followed by s.
inline Matrix hankel_block(const LssModel& model, const Word& s, const Word& v) {
  Word vs = v;
  vs.insert(vs.end(), s.begin(), s.end());
  return markov_parameter(model, vs);
}

/// Calls f(word, A_word * X) for every word of length <= max_len, in
/// length-then-lexicographic order.
inline void for_each_word(const LssModel& model, int max_len, const Matrix& x,
                          const std::function<void(const Word&, const Matrix&)>& f) {
  std::vector<std::pair<Word, Matrix>> level{{Word{}, x}};
  for (int len = 0; len <= max_len; ++len) {
    for (const auto& [w, ax] : level) f(w, ax);
    if (len == max_len) break;
    std::vector<std::pair<Word, Matrix>> next;
    next.reserve(level.size() * static_cast<std::size_t>(model.num_modes()));
    for (const auto& [w, ax] : level) {
      for (Index q = 0; q < model.num_modes(); ++q) {
        Word w2 = w;
        w2.push_back(q);
        next.emplace_back(std::move(w2), model.A(q) * ax);
      }
    }
    level = std::move(next);
  }
}

/// Literal reachability matrix [A_v B_q] over words |v| <= n - 1.
inline Matrix reachability_matrix(const LssModel& model) {
  std::vector<Matrix> cols;
  for_each_word(model, static_cast<int>(model.n()) - 1, model.stacked_B(),
                [&](const Word&, const Matrix& ab) { cols.push_back(ab); });
  Matrix out(model.n(), static_cast<Index>(cols.size()) * model.stacked_B().cols());
  for (std::size_t i = 0; i < cols.size(); ++i) out.middleCols(static_cast<Index>(i) * cols[i].cols(), cols[i].cols()) = cols[i];
  return out;
}

/// Literal observability matrix [C_q A_v] over words |v| <= n - 1.
inline Matrix observability_matrix(const LssModel& model) {
  return reachability_matrix(dual_system(model)).transpose();
}

/// Compares Markov parameters of all words up to `max_len`. Differences are
/// measured relative to the largest Markov parameter norm of either model.
inline bool markov_equivalent(const LssModel& a, const LssModel& b, int max_len, double rel_tol = 1e-9,
                              double* worst = nullptr) {
  if (a.num_modes() != b.num_modes() || a.m() != b.m() || a.p() != b.p())
    throw InputError("markov_equivalent: models have different mode counts or I/O sizes");
  std::vector<Matrix> ma, mb;
  for_each_word(a, max_len, a.stacked_B(), [&](const Word&, const Matrix& ab) { ma.push_back(a.stacked_C() * ab); });
  for_each_word(b, max_len, b.stacked_B(), [&](const Word&, const Matrix& ab) { mb.push_back(b.stacked_C() * ab); });
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    scale = std::max({scale, ma[i].norm(), mb[i].norm()});
    diff = std::max(diff, (ma[i] - mb[i]).norm());
  }
  const double rel = scale > 0 ? diff / scale : diff;
  if (worst) *worst = rel;
  return rel <= rel_tol;
}

/// Least-squares S with S R_1 = R_2 from the reachability matrices of two
/// realizations of the same dimension; `residual` receives the relative
/// mismatch of S A1 = A2 S, S B1 = B2, C1 = C2 S.
inline Matrix recover_isomorphism(const LssModel& from, const LssModel& to, double* residual = nullptr) {
  if (from.n() != to.n()) throw InputError("recover_isomorphism: dimensions differ");
  const Matrix r1 = reachability_matrix(from);
  const Matrix r2 = reachability_matrix(to);
  // S = R2 R1^+ via the normal equations on the transposed system.
  const Matrix s = r1.transpose().completeOrthogonalDecomposition().solve(r2.transpose()).transpose();
  if (residual) {
    double num = 0.0, den = 1e-300;
    for (Index q = 0; q < from.num_modes(); ++q) {
      num += (s * from.A(q) - to.A(q) * s).squaredNorm() + (s * from.B(q) - to.B(q)).squaredNorm() +
             (from.C(q) - to.C(q) * s).squaredNorm();
      den += (to.A(q) * s).squaredNorm() + to.B(q).squaredNorm() + from.C(q).squaredNorm();
    }
    *residual = std::sqrt(num / den);
  }
  return s;
}

}  // namespace lssbalred
