#pragma once

// Two reformulations of a discrete-time switched system.
//
// The structured uncertain embedding M = [A B; C 0] with D + 1 state blocks:
//   A = [0 A_1 ... A_D; I 0 ... 0; ...; I 0 ... 0],
//   B = [B_1 ... B_D; 0; ...; 0],   C = [0 C_1 ... C_D].
//
// The stochastic embedding, where the mode is drawn i.i.d. with probability
// p and every matrix is scaled by 1/sqrt(p).

#include "lssbalred/grammians.hpp"
#include "lssbalred/realization.hpp"
#include "lssbalred/simulate.hpp"
#include "lssbalred/stability.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace lssbalred {

struct UncertainEmbedding {
  Matrix A;  // n(D+1) x n(D+1)
  Matrix B;  // n(D+1) x mD
  Matrix C;  // p x n(D+1)
  Index n = 0;
  Index num_modes = 0;

  Index blocks() const { return num_modes + 1; }
  /// n x n block (i, j), 0-based.
  Matrix block(Index i, Index j) const { return A.block(i * n, j * n, n, n); }
};

inline UncertainEmbedding build_uncertain_embedding(const LssModel& model) {
  require_valid(model);
  require_discrete(model, "the uncertain embedding");
  const Index n = model.n(), d = model.num_modes(), m = model.m(), p = model.p();
  UncertainEmbedding e;
  e.n = n;
  e.num_modes = d;
  e.A = Matrix::Zero(n * (d + 1), n * (d + 1));
  e.B = Matrix::Zero(n * (d + 1), m * d);
  e.C = Matrix::Zero(p, n * (d + 1));
  for (Index q = 0; q < d; ++q) {
    e.A.block(0, n * (q + 1), n, n) = model.A(q);
    e.A.block(n * (q + 1), 0, n, n) = Matrix::Identity(n, n);
    e.B.block(0, m * q, n, m) = model.B(q);
    e.C.block(0, n * (q + 1), p, n) = model.C(q);
  }
  return e;
}

struct BlockSubspaces {
  std::vector<Matrix> bases;  // orthonormal basis per block

  std::vector<Index> dimensions() const {
    std::vector<Index> out;
    for (const auto& b : bases) out.push_back(b.cols());
    return out;
  }
};

namespace detail {

/// Smallest family of subspaces V_i with Im G_i in V_i and A_ij V_j in V_i,
/// for a multidimensional system with k blocks of size n.
inline BlockSubspaces block_reachable(const UncertainEmbedding& e, const Matrix& a, const Matrix& g) {
  const Index n = e.n, k = e.blocks();
  BlockSubspaces out;
  for (Index i = 0; i < k; ++i) out.bases.push_back(linalg::range_basis(g.middleRows(i * n, n)));
  for (int iter = 0; iter < static_cast<int>(n * k + 1); ++iter) {
    bool grew = false;
    BlockSubspaces next;
    for (Index i = 0; i < k; ++i) {
      Matrix stacked = out.bases[static_cast<std::size_t>(i)];
      for (Index j = 0; j < k; ++j) {
        const Matrix aij = a.block(i * n, j * n, n, n);
        const Matrix& vj = out.bases[static_cast<std::size_t>(j)];
        if (vj.cols() == 0 || aij.isZero(0.0)) continue;
        Matrix grown(n, stacked.cols() + vj.cols());
        grown << stacked, aij * vj;
        stacked = std::move(grown);
      }
      Matrix basis = stacked.cols() ? linalg::range_basis(stacked) : Matrix(n, 0);
      grew = grew || basis.cols() > out.bases[static_cast<std::size_t>(i)].cols();
      next.bases.push_back(std::move(basis));
    }
    out = std::move(next);
    if (!grew) break;
  }
  return out;
}

}  // namespace detail

struct UncertainMinimalityReport {
  bool model_reachable = false;
  bool model_observable = false;
  /// Per-block reachable and observable dimensions of the embedding.
  std::vector<Index> embedding_reachable_dims;
  std::vector<Index> embedding_observable_dims;
  bool embedding_reachable = false;
  bool embedding_observable = false;

  bool model_minimal() const { return model_reachable && model_observable; }
  bool embedding_minimal() const { return embedding_reachable && embedding_observable; }
  bool agree() const { return model_minimal() == embedding_minimal(); }
};

/// Compares minimality of the model with the blockwise rank conditions of
/// its uncertain embedding. The embedding is reachable when every block's
/// reachable space is full. Observability is read off the first block,
/// whose observable space is that of the model; the remaining blocks are
/// ker C_q intersected with preimages under A_q and can be deficient even
/// for observable models with singular A_q.
inline UncertainMinimalityReport check_uncertain_minimality_equivalence(const LssModel& model) {
  const auto e = build_uncertain_embedding(model);
  if (e.A.rows() > 30) throw InputError("uncertain minimality check is limited to n(D+1) <= 30");
  UncertainMinimalityReport rep;
  rep.model_reachable = is_span_reachable(model);
  rep.model_observable = is_observable(model);
  const auto reach = detail::block_reachable(e, e.A, e.B);
  // Observable spaces are reachable spaces of the transposed system.
  const auto obs = detail::block_reachable(e, e.A.transpose(), e.C.transpose());
  rep.embedding_reachable_dims = reach.dimensions();
  rep.embedding_observable_dims = obs.dimensions();
  rep.embedding_reachable = true;
  for (auto dim : rep.embedding_reachable_dims) rep.embedding_reachable = rep.embedding_reachable && dim == e.n;
  rep.embedding_observable = rep.embedding_observable_dims.front() == e.n;
  return rep;
}

/// Block-diagonal grammians diag(X_1, ..., X_{D+1}) of the embedding.
struct BlockGrammians {
  std::vector<Matrix> P;
  std::vector<Matrix> Q;

  Matrix full_P() const { return assemble(P); }
  Matrix full_Q() const { return assemble(Q); }

  static Matrix assemble(const std::vector<Matrix>& blocks) {
    Index total = 0;
    for (const auto& b : blocks) total += b.rows();
    Matrix out = Matrix::Zero(total, total);
    Index off = 0;
    for (const auto& b : blocks) {
      out.block(off, off, b.rows(), b.cols()) = b;
      off += b.rows();
    }
    return out;
  }
};

/// Strict block grammians of the embedding, built in closed form:
///   P_1 = D sum_q A_q P_1 A_q^T + sum_q (eps A_q A_q^T + B_q B_q^T) + eps I,
///   P_{q+1} = D P_1 + eps I,
///   Q_1 = D sum_q (A_q^T Q_1 A_q + C_q^T C_q + eps I) + eps I,
///   Q_{q+1} = D (A_q^T Q_1 A_q + C_q^T C_q + eps I).
/// The factor D absorbs the coupling of the identity column blocks
/// (Cauchy-Schwarz), so both embedded inequalities hold with margin eps.
/// Requires rho(D sum_q A_q (x) A_q) < 1.
inline BlockGrammians beck_block_grammians(const LssModel& model, double eps = 1e-6) {
  require_valid(model);
  require_discrete(model, "block grammians of the uncertain embedding");
  const Index n = model.n(), d = model.num_modes();
  const double dd = static_cast<double>(d);
  std::vector<Matrix> fs, fts;
  Matrix gp = eps * Matrix::Identity(n, n), gq = eps * Matrix::Identity(n, n);
  for (Index q = 0; q < d; ++q) {
    fs.push_back(std::sqrt(dd) * model.A(q));
    fts.push_back(std::sqrt(dd) * model.A(q).transpose());
    gp += eps * model.A(q) * model.A(q).transpose() + model.B(q) * model.B(q).transpose();
    gq += dd * (model.C(q).transpose() * model.C(q) + eps * Matrix::Identity(n, n));
  }
  Matrix k = Matrix::Zero(n * n, n * n);
  for (const auto& f : fs) k += linalg::kron(f, f);
  if (linalg::spectral_radius(k) >= 1.0)
    throw InfeasibleError("embedding block grammians need rho(D sum A_q (x) A_q) < 1");
  BlockGrammians out;
  const Matrix p1 = detail::summed_stein(fs, gp);
  const Matrix q1 = detail::summed_stein(fts, gq);
  out.P.push_back(p1);
  out.Q.push_back(q1);
  for (Index q = 0; q < d; ++q) {
    out.P.push_back(dd * p1 + eps * Matrix::Identity(n, n));
    out.Q.push_back(linalg::symmetrize(dd * (model.A(q).transpose() * q1 * model.A(q) +
                                             model.C(q).transpose() * model.C(q) + eps * Matrix::Identity(n, n))));
  }
  return out;
}

struct BeckProjectionReport {
  double embedded_ctrl_residual = 0.0;  // max eig of A P A^T + B B^T - P
  double embedded_obs_residual = 0.0;   // max eig of A^T Q A + C^T C - Q
  double averaged_ctrl_residual = 0.0;  // max eig of sum_q (A_q P_1 A_q^T + B_q B_q^T) - P_1
  double averaged_obs_residual = 0.0;
  MembershipReport ctrl_membership;
  MembershipReport obs_membership;

  bool pass() const {
    return averaged_ctrl_residual <= 0.0 && averaged_obs_residual <= 0.0 && ctrl_membership.member() &&
           obs_membership.member();
  }
};

/// Given block grammians of the embedding, checks that the first blocks
/// satisfy the averaged inequalities and are grammians of the model.
inline BeckProjectionReport check_beck_grammian_projection(const LssModel& model, const BlockGrammians& blocks,
                                                           double tol = 1e-9) {
  const auto e = build_uncertain_embedding(model);
  const Index n = model.n(), k = e.blocks();
  if (static_cast<Index>(blocks.P.size()) != k || static_cast<Index>(blocks.Q.size()) != k)
    throw InputError("block grammians must have D + 1 blocks");
  for (Index i = 0; i < k; ++i) {
    const Matrix& pi = blocks.P[static_cast<std::size_t>(i)];
    const Matrix& qi = blocks.Q[static_cast<std::size_t>(i)];
    if (pi.rows() != n || pi.cols() != n || qi.rows() != n || qi.cols() != n)
      throw InputError("block grammians have the wrong block size");
    if (linalg::min_eigenvalue(pi) <= 0.0 || linalg::min_eigenvalue(qi) <= 0.0)
      throw InputError("block grammians must be positive definite");
  }
  const Matrix p = blocks.full_P(), q = blocks.full_Q();
  BeckProjectionReport rep;
  rep.embedded_ctrl_residual = linalg::max_eigenvalue(e.A * p * e.A.transpose() + e.B * e.B.transpose() - p);
  rep.embedded_obs_residual = linalg::max_eigenvalue(e.A.transpose() * q * e.A + e.C.transpose() * e.C - q);
  const double scale = std::max({1.0, p.norm(), q.norm()});
  if (rep.embedded_ctrl_residual > tol * scale || rep.embedded_obs_residual > tol * scale)
    throw InputError("block matrices are not grammians of the uncertain embedding");
  const Matrix& p1 = blocks.P.front();
  const Matrix& q1 = blocks.Q.front();
  rep.averaged_ctrl_residual = linalg::max_eigenvalue(families::averaged_residual(model, p1, SetKind::kControllability));
  rep.averaged_obs_residual = linalg::max_eigenvalue(families::averaged_residual(model, q1, SetKind::kObservability));
  rep.ctrl_membership = check_membership(model, p1, SetKind::kControllability);
  rep.obs_membership = check_membership(model, q1, SetKind::kObservability);
  return rep;
}

struct StochasticEmbedding {
  LssModel model;  // matrices scaled by 1/sqrt(p)
  double p = 1.0;
};

inline StochasticEmbedding stochastic_embedding(const LssModel& model, double p = -1.0) {
  require_valid(model);
  require_discrete(model, "the stochastic embedding");
  const double dd = static_cast<double>(model.num_modes());
  if (p < 0) p = 1.0 / dd;
  if (!(p > 0.0 && p <= 1.0) || p * dd > 1.0 + 1e-12) throw InputError("mode probability must satisfy 0 < p, p D <= 1");
  StochasticEmbedding out;
  out.p = p;
  out.model = model;
  const double s = 1.0 / std::sqrt(p);
  for (auto& md : out.model.modes) {
    md.A *= s;
    md.B *= s;
    md.C *= s;
  }
  return out;
}

/// Expected one-step grammian residual of the jump system:
///   sum_q p (A~_q X A~_q^T + B~_q B~_q^T) - X   (controllability), or the
/// observability analog. Equal to the averaged residual of the model.
inline Matrix stochastic_grammian_residual(const StochasticEmbedding& st, const Matrix& x, SetKind kind) {
  Matrix r = -x;
  for (const auto& md : st.model.modes) {
    if (kind == SetKind::kControllability) {
      r += st.p * (md.A * x * md.A.transpose() + md.B * md.B.transpose());
    } else if (kind == SetKind::kObservability) {
      r += st.p * (md.A.transpose() * x * md.A + md.C.transpose() * md.C);
    } else {
      throw InputError("stochastic grammian residual is defined for O and C only");
    }
  }
  return linalg::symmetrize(r);
}

/// Spectral radius of sum_q p A~_q (x) A~_q: below one iff the jump system
/// is mean-square stable.
inline double mean_square_radius(const StochasticEmbedding& st) {
  const Index n = st.model.n();
  Matrix k = Matrix::Zero(n * n, n * n);
  for (const auto& md : st.model.modes) k += st.p * linalg::kron(md.A, md.A);
  return linalg::spectral_radius(k);
}

/// Sum over all words q_0 ... q_t (1 <= t <= horizon) of
/// ||C_{q_t} A_{q_{t-1}} ... A_{q_1} B_{q_0} u0||^2: the exact expected
/// output energy of the uniform jump system driven by an impulse u0 at t = 0.
inline double stochastic_impulse_word_sum(const LssModel& model, const Vector& u0, int horizon) {
  require_valid(model);
  const double d = static_cast<double>(model.num_modes());
  if (std::pow(d, horizon + 1) > 1e7) throw InputError("oracle budget exceeded: too many words");
  double total = 0.0;
  std::function<void(const Vector&, int)> visit = [&](const Vector& x, int t) {
    if (t > horizon) return;
    for (Index q = 0; q < model.num_modes(); ++q) {
      total += (model.C(q) * x).squaredNorm();
      visit(model.A(q) * x, t + 1);
    }
  };
  for (Index q0 = 0; q0 < model.num_modes(); ++q0) visit(model.B(q0) * u0, 1);
  return total;
}

struct StochasticEnergyReport {
  double mean = 0.0;
  double standard_error = 0.0;
  int trials = 0;
  /// Largest deterministic output energy over the sampled switching sequences.
  double deterministic_max = 0.0;
  bool dominates = false;  // deterministic_max <= mean + 3 SE + tol
};

/// Monte Carlo estimate of sum_{t <= horizon} E ||y~(t)||^2 for the uniform
/// jump system driven by u (zero-padded to the horizon), plus the largest
/// deterministic energy sum_t ||y(t)||^2 over `deterministic` sampled
/// sequences of the original model.
inline StochasticEnergyReport monte_carlo_stochastic_energy(const LssModel& model, const Matrix& u, int trials,
                                                            int horizon, std::uint64_t seed = 1,
                                                            int deterministic = 20, double tol = 1e-9) {
  require_valid(model);
  require_discrete(model, "stochastic energy");
  if (trials < 2 || horizon < 0) throw InputError("need at least two trials and a nonnegative horizon");
  if (u.rows() != model.m()) throw InputError("input has the wrong number of rows");
  const auto st = stochastic_embedding(model);
  const Index steps = horizon + 1;
  Matrix uu = Matrix::Zero(model.m(), steps);
  const Index used = std::min<Index>(steps, u.cols());
  uu.leftCols(used) = u.leftCols(used);
  const Index d = model.num_modes();
  auto run = [&](const LssModel& sys, std::uint64_t s1, int i) {
    std::seed_seq seq{s1, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<Index> pick(0, d - 1);
    std::vector<Index> modes(static_cast<std::size_t>(steps));
    for (auto& q : modes) q = pick(rng);
    return simulate(sys, uu, SwitchingSignal::discrete(std::move(modes))).y.squaredNorm();
  };
  std::vector<double> energy(static_cast<std::size_t>(trials));
  detail::parallel_for(trials, [&](int i) { energy[static_cast<std::size_t>(i)] = run(st.model, seed, i); });
  StochasticEnergyReport rep;
  rep.trials = trials;
  double sum = 0.0, sq = 0.0;
  for (double e : energy) sum += e;
  rep.mean = sum / trials;
  for (double e : energy) sq += (e - rep.mean) * (e - rep.mean);
  rep.standard_error = std::sqrt(sq / (trials - 1) / trials);
  for (int i = 0; i < deterministic; ++i) rep.deterministic_max = std::max(rep.deterministic_max, run(model, seed + 0x9e37, i));
  rep.dominates = rep.deterministic_max <= rep.mean + 3.0 * rep.standard_error + tol;
  return rep;
}

}  // namespace lssbalred
