#pragma once

// Trajectory simulation from the zero state, signal norms, empirical lower
// bounds on the L2 and Hankel gains, and trajectory checks of the
// grammian energy inequalities and the truncation error bound.
//
// Discrete time is simulated exactly. Continuous time uses the classical
// RK4 step with the input held constant over each step; for a linear mode
// that step is the propagator
//   x+ = (I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24) x
//        + h (I + hA/2 + (hA)^2/6 + (hA)^3/24) B u,
// which is what is precomputed per mode below.

#include "lssbalred/grammians.hpp"
#include "lssbalred/model.hpp"

#include <atomic>
#include <mutex>
#include <random>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <vector>

namespace lssbalred {

struct Trajectory {
  TimeDomain time_domain = TimeDomain::kDiscrete;
  double h = 1.0;
  Vector times;            // DT: 0..N-1; CT: 0, h, ..., N h
  Matrix u;                // m x N (CT: value held on [t_k, t_k + h))
  Matrix x;                // n x (N + 1), x(0) = 0
  Matrix y;                // DT: p x N; CT: p x (N + 1), y(t_k) = C_{q(t_k)} x(t_k)
  std::vector<Index> modes;  // active mode on each step / interval, length N
  SwitchingSignal switching = SwitchingSignal::discrete({0});

  Index steps() const { return u.cols(); }
};

namespace detail {

/// Per-step mode indices. CT dwell boundaries must fall on the grid within
/// 1e-9 (relative to the step count); the last mode is held to the horizon.
inline std::vector<Index> mode_schedule(const SwitchingSignal& q, Index steps, double h, Index num_modes) {
  if (q.max_mode() >= num_modes) throw InputError("switching signal uses a mode index out of range");
  std::vector<Index> out(static_cast<std::size_t>(steps));
  if (q.domain() == TimeDomain::kDiscrete) {
    for (Index t = 0; t < steps; ++t) out[static_cast<std::size_t>(t)] = q.mode_at_step(t);
    return out;
  }
  Index k = 0;
  double elapsed = 0.0;
  for (const auto& d : q.dwells()) {
    elapsed += d.duration;
    const double ratio = elapsed / h;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw InputError("integration step does not divide the dwell times");
    const auto end = static_cast<Index>(rounded);
    for (; k < std::min(end, steps); ++k) out[static_cast<std::size_t>(k)] = d.mode;
    if (k >= steps) break;
  }
  const Index last = q.dwells().back().mode;
  for (; k < steps; ++k) out[static_cast<std::size_t>(k)] = last;
  return out;
}

struct Propagator {
  Matrix phi;
  Matrix gamma;
};

inline std::vector<Propagator> propagators(const LssModel& model, double h) {
  std::vector<Propagator> out;
  const Index n = model.n();
  const Matrix I = Matrix::Identity(n, n);
  for (const auto& md : model.modes) {
    if (model.discrete()) {
      out.push_back({md.A, md.B});
      continue;
    }
    const Matrix ha = h * md.A;
    const Matrix ha2 = ha * ha;
    const Matrix ha3 = ha2 * ha;
    const Matrix ha4 = ha3 * ha;
    out.push_back({I + ha + ha2 / 2.0 + ha3 / 6.0 + ha4 / 24.0,
                   h * (I + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) * md.B});
  }
  return out;
}

}  // namespace detail

/// Simulates from x(0) = 0. The horizon is the number of input columns.
inline Trajectory simulate(const LssModel& model, const Matrix& u, const SwitchingSignal& q, double h = 1.0) {
  require_valid(model);
  if (u.rows() != model.m()) throw InputError("input has the wrong number of rows");
  if (!u.allFinite()) throw InputError("input has non-finite samples");
  if (q.domain() != model.time_domain) throw InputError("switching signal and model time domains differ");
  if (!model.discrete() && !(h > 0.0)) throw InputError("integration step must be positive");
  Trajectory tr;
  tr.time_domain = model.time_domain;
  tr.h = model.discrete() ? 1.0 : h;
  tr.u = u;
  tr.switching = q;
  const Index steps = u.cols();
  const Index n = model.n();
  tr.modes = detail::mode_schedule(q, steps, tr.h, model.num_modes());
  const auto props = detail::propagators(model, tr.h);
  tr.x = Matrix::Zero(n, steps + 1);
  for (Index k = 0; k < steps; ++k) {
    const auto& pr = props[static_cast<std::size_t>(tr.modes[static_cast<std::size_t>(k)])];
    tr.x.col(k + 1) = pr.phi * tr.x.col(k) + pr.gamma * u.col(k);
  }
  if (model.discrete()) {
    tr.times = Vector::LinSpaced(steps, 0.0, static_cast<double>(steps - 1));
    tr.y.resize(model.p(), steps);
    for (Index k = 0; k < steps; ++k) tr.y.col(k) = model.C(tr.modes[static_cast<std::size_t>(k)]) * tr.x.col(k);
  } else {
    tr.times = Vector::LinSpaced(steps + 1, 0.0, tr.h * static_cast<double>(steps));
    tr.y.resize(model.p(), steps + 1);
    for (Index k = 0; k <= steps; ++k) {
      const Index mode = tr.modes[static_cast<std::size_t>(std::min(k, steps - 1))];
      tr.y.col(k) = model.C(mode) * tr.x.col(k);
    }
  }
  return tr;
}

struct NormEstimate {
  double value = 0.0;
  double error_bound = 0.0;  // bound on |value^2 - true energy|
};

/// l2 norm of DT samples (exact partial sum).
inline double signal_l2_norm(const Matrix& samples) { return samples.norm(); }

/// L2 norm of CT samples on a uniform grid by the trapezoid rule, with the
/// O(h^2) error term estimated from second differences of ||f||^2.
inline NormEstimate signal_l2_norm(const Matrix& samples, double h) {
  NormEstimate out;
  const Index n = samples.cols();
  if (n < 2) return out;
  Vector f(n);
  for (Index k = 0; k < n; ++k) f(k) = samples.col(k).squaredNorm();
  const double energy = h * (f.sum() - 0.5 * (f(0) + f(n - 1)));
  double curv = 0.0;
  for (Index k = 1; k + 1 < n; ++k) curv = std::max(curv, std::abs(f(k + 1) - 2.0 * f(k) + f(k - 1)));
  out.value = std::sqrt(std::max(energy, 0.0));
  out.error_bound = static_cast<double>(n - 1) * h * curv / 12.0;
  return out;
}

/// Norm of a zero-order-hold input: exact.
inline double zoh_l2_norm(const Matrix& u, double h) { return std::sqrt(h) * u.norm(); }

namespace detail {

/// Output energy on steps [from, N). In CT each interval is integrated with
/// both endpoints evaluated in that interval's mode, so output jumps at
/// switching instants cost nothing; the error bound uses the exact second
/// derivative of ||C x||^2 at the left endpoint.
inline NormEstimate output_energy(const LssModel& model, const Trajectory& tr, Index from = 0) {
  NormEstimate out;
  const Index steps = tr.steps();
  if (model.discrete()) {
    for (Index k = from; k < steps; ++k) out.value += tr.y.col(k).squaredNorm();
    return out;
  }
  const double h = tr.h;
  for (Index k = from; k < steps; ++k) {
    const Index q = tr.modes[static_cast<std::size_t>(k)];
    const Matrix& c = model.C(q);
    const Vector yl = c * tr.x.col(k);
    const Vector yr = c * tr.x.col(k + 1);
    out.value += 0.5 * h * (yl.squaredNorm() + yr.squaredNorm());
    const Vector dx = model.A(q) * tr.x.col(k) + model.B(q) * tr.u.col(k);
    const Vector ddx = model.A(q) * dx;
    const Vector cdx = c * dx;
    const double f2 = 2.0 * cdx.squaredNorm() + 2.0 * yl.dot(c * ddx);
    out.error_bound += 2.0 * h * h * h / 12.0 * std::abs(f2);
  }
  return out;
}

inline double input_energy(const Trajectory& tr, Index upto) {
  double e = 0.0;
  for (Index k = 0; k < upto; ++k) e += tr.u.col(k).squaredNorm();
  return e * tr.h;
}

inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LSSBALRED_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

/// Runs f(i) for i in [0, count) on up to thread_count() threads. Callers
/// write results into per-index slots, so the outcome is independent of
/// scheduling.
template <class F>
void parallel_for(int count, F f) {
  const unsigned threads = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max(count, 1)));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct SimOptions {
  int trials = 100;
  /// DT: number of steps. CT: final time in seconds.
  double horizon = 200.0;
  double h = 0.01;
  std::uint64_t seed = 1;
  /// Mean dwell time (CT, seconds) of the random switching signal.
  double mean_dwell = 1.0;
};

inline Index horizon_steps(const LssModel& model, const SimOptions& opts) {
  const double steps = model.discrete() ? opts.horizon : opts.horizon / opts.h;
  if (!(steps >= 1.0) || steps > 1e7) throw InputError("horizon must cover between 1 and 1e7 steps");
  return static_cast<Index>(std::llround(steps));
}

/// One random experiment: input samples, switching signal and (for Hankel
/// experiments) the step after which the input is zero.
struct Excitation {
  Matrix u;
  SwitchingSignal q = SwitchingSignal::discrete({0});
  Index cutoff = 0;
};

enum class ExcitationKind { kGain, kHankel };

/// Deterministic in (seed, trial). Every fourth trial uses a slowly varying
/// input, which is where single-mode gains of low-pass systems are attained.
/// CT inputs are sums of five sinusoids; DT inputs are AR(1)-filtered noise.
/// Hankel experiments multiply by a rising exponential and cut off.
inline Excitation random_excitation(const LssModel& model, const SimOptions& opts, int trial, ExcitationKind kind) {
  std::seed_seq seq{static_cast<std::uint64_t>(opts.seed), static_cast<std::uint64_t>(trial), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index steps = horizon_steps(model, opts);
  const Index m = model.m();
  const bool slow = trial % 4 == 0;
  const double h = model.discrete() ? 1.0 : opts.h;
  Excitation ex;
  ex.cutoff = steps;
  if (kind == ExcitationKind::kHankel) ex.cutoff = std::max<Index>(1, static_cast<Index>(unif(rng) * 0.5 * steps));
  ex.u = Matrix::Zero(m, steps);
  const double rate = slow ? 0.3 + 2.0 * unif(rng) : 0.05 + 4.0 * unif(rng);
  for (Index j = 0; j < m; ++j) {
    if (model.discrete()) {
      const double pole = slow ? 1.0 - std::pow(10.0, -1.0 - 2.0 * unif(rng))
                               : (unif(rng) < 0.7 ? 1.0 : -1.0) * (1.0 - std::pow(10.0, -3.0 * unif(rng)));
      double s = 0.0;
      for (Index k = 0; k < ex.cutoff; ++k) {
        s = pole * s + normal(rng);
        ex.u(j, k) = s;
      }
    } else {
      const double wmax = std::min(20.0, 0.5 / h);
      for (int c = 0; c < 5; ++c) {
        const double w = slow ? 0.05 * unif(rng) : wmax * std::pow(unif(rng), 3.0);
        const double phase = 2.0 * M_PI * unif(rng);
        const double amp = normal(rng);
        for (Index k = 0; k < ex.cutoff; ++k) ex.u(j, k) += amp * std::sin(w * k * h + phase);
      }
    }
  }
  if (kind == ExcitationKind::kHankel) {
    const double tc = static_cast<double>(ex.cutoff) * h;
    for (Index k = 0; k < ex.cutoff; ++k) ex.u.col(k) *= std::exp(rate * (k * h - tc));
  }
  const double norm = std::sqrt(h) * ex.u.norm();
  if (norm > 0) ex.u /= norm;
  if (model.discrete()) {
    std::vector<Index> seq_modes(static_cast<std::size_t>(steps));
    std::uniform_int_distribution<Index> pick(0, model.num_modes() - 1);
    for (auto& q : seq_modes) q = pick(rng);
    if (slow) std::fill(seq_modes.begin(), seq_modes.end(), pick(rng));
    ex.q = SwitchingSignal::discrete(std::move(seq_modes));
  } else {
    std::vector<Dwell> dwells;
    std::exponential_distribution<double> expo(1.0 / opts.mean_dwell);
    std::uniform_int_distribution<Index> pick(0, model.num_modes() - 1);
    Index covered = 0;
    while (covered < steps) {
      Index len = std::max<Index>(1, static_cast<Index>(std::llround(expo(rng) / h)));
      if (slow) len = steps;
      len = std::min(len, steps - covered);
      dwells.push_back(Dwell{pick(rng), static_cast<double>(len) * h});
      covered += len;
    }
    ex.q = SwitchingSignal::continuous(std::move(dwells));
  }
  return ex;
}

struct GainEstimate {
  double lower_bound = 0.0;
  int best_trial = -1;  // replay with random_excitation(model, opts, best_trial, kind)
  int trials = 0;
  double horizon = 0.0;
};

namespace detail {

inline GainEstimate gain_estimate(const LssModel& model, const SimOptions& opts, ExcitationKind kind) {
  require_valid(model);
  std::vector<double> ratio(static_cast<std::size_t>(std::max(opts.trials, 0)), 0.0);
  parallel_for(opts.trials, [&](int i) {
    const auto ex = random_excitation(model, opts, i, kind);
    const auto tr = simulate(model, ex.u, ex.q, opts.h);
    const double in = model.discrete() ? ex.u.norm() : zoh_l2_norm(ex.u, tr.h);
    if (!(in > 0.0)) return;
    const Index from = kind == ExcitationKind::kHankel ? ex.cutoff : 0;
    const auto e = output_energy(model, tr, from);
    ratio[static_cast<std::size_t>(i)] = std::sqrt(std::max(e.value, 0.0)) / in;
  });
  GainEstimate out;
  out.trials = opts.trials;
  out.horizon = opts.horizon;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    if (ratio[i] > out.lower_bound) {
      out.lower_bound = ratio[i];
      out.best_trial = static_cast<int>(i);
    }
  }
  return out;
}

}  // namespace detail

/// max over trials of ||y||_2 / ||u||_2: a lower bound on the L2 gain.
inline GainEstimate empirical_gain(const LssModel& model, const SimOptions& opts = {}) {
  return detail::gain_estimate(model, opts, ExcitationKind::kGain);
}

/// max over trials of (output energy after the cutoff)^(1/2) / ||u||_2 with
/// u zero after the cutoff: a lower bound on the Hankel norm.
inline GainEstimate empirical_hankel_gain(const LssModel& model, const SimOptions& opts = {}) {
  return detail::gain_estimate(model, opts, ExcitationKind::kHankel);
}

struct ErrorBoundReport {
  double worst_ratio = 0.0;
  int worst_trial = -1;
  double bound = 0.0;
  double slack = 0.0;
  double quadrature_error = 0.0;
  int trials = 0;
  bool pass = false;
};

/// Simulates the original and reduced models on identical (u, q) and checks
/// ||y - y_hat||_2 <= bound * ||u||_2 + slack.
inline ErrorBoundReport verify_error_bound(const LssModel& model, const LssModel& reduced, double bound,
                                           const SimOptions& opts = {}, double slack = 1e-6) {
  require_valid(model);
  if (reduced.num_modes() != model.num_modes() || reduced.m() != model.m() || reduced.p() != model.p() ||
      reduced.time_domain != model.time_domain)
    throw InputError("verify_error_bound: reduced model is incompatible with the original");
  // The error system is the direct sum with negated reduced output.
  LssModel neg = reduced;
  for (auto& md : neg.modes) md.C = -md.C;
  const LssModel err = direct_sum(model, neg);
  std::vector<double> ratio(static_cast<std::size_t>(std::max(opts.trials, 0)), 0.0);
  std::vector<double> quad(ratio.size(), 0.0);
  detail::parallel_for(opts.trials, [&](int i) {
    const auto ex = random_excitation(model, opts, i, ExcitationKind::kGain);
    const auto tr = simulate(err, ex.u, ex.q, opts.h);
    const double in = model.discrete() ? ex.u.norm() : zoh_l2_norm(ex.u, tr.h);
    if (!(in > 0.0)) return;
    const auto e = detail::output_energy(err, tr);
    ratio[static_cast<std::size_t>(i)] = std::sqrt(std::max(e.value, 0.0)) / in;
    // Convert the energy error into a bound on the ratio.
    quad[static_cast<std::size_t>(i)] = std::sqrt(e.error_bound) / in;
  });
  ErrorBoundReport out;
  out.bound = bound;
  out.trials = opts.trials;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    out.quadrature_error = std::max(out.quadrature_error, quad[i]);
    if (ratio[i] > out.worst_ratio) {
      out.worst_ratio = ratio[i];
      out.worst_trial = static_cast<int>(i);
    }
  }
  out.slack = slack + out.quadrature_error;
  out.pass = out.worst_ratio <= bound + out.slack;
  return out;
}

struct EnergyReport {
  int trials = 0;
  /// max over trajectories and times of x^T P^-1 x - input energy so far.
  double reach_excess = -std::numeric_limits<double>::infinity();
  /// max over trajectories of future output energy - x^T Q x at the cutoff.
  double future_excess = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool pass = false;
};

/// Along random trajectories: x(t)^T P^-1 x(t) <= int_0^t ||u||^2 at every
/// sample up to the cutoff, and with the input zero after the cutoff the
/// remaining output energy is at most x^T Q x.
inline EnergyReport check_energy_lemmas(const LssModel& model, const GrammianPair& pair, const SimOptions& opts = {},
                                        double tol = 1e-6) {
  require_valid(model);
  const Index n = model.n();
  if (pair.P.rows() != n || pair.Q.rows() != n) throw InputError("grammian size does not match the model");
  Eigen::LLT<Matrix> llt(linalg::symmetrize(pair.P));
  if (llt.info() != Eigen::Success) throw InputError("controllability grammian is not positive definite");
  std::vector<double> reach(static_cast<std::size_t>(std::max(opts.trials, 0)), -1e300);
  std::vector<double> future(reach.size(), -1e300);
  std::vector<double> quad(reach.size(), 0.0);
  detail::parallel_for(opts.trials, [&](int i) {
    const auto ex = random_excitation(model, opts, i, ExcitationKind::kHankel);
    const auto tr = simulate(model, ex.u, ex.q, opts.h);
    double worst = -1e300;
    double used = 0.0;
    for (Index k = 0; k <= ex.cutoff; ++k) {
      const Vector xk = tr.x.col(k);
      worst = std::max(worst, xk.dot(llt.solve(xk)) - used);
      if (k < tr.steps()) used += tr.u.col(k).squaredNorm() * tr.h;
    }
    reach[static_cast<std::size_t>(i)] = worst;
    const Vector xc = tr.x.col(ex.cutoff);
    const auto e = detail::output_energy(model, tr, ex.cutoff);
    future[static_cast<std::size_t>(i)] = e.value - xc.dot(pair.Q * xc);
    quad[static_cast<std::size_t>(i)] = e.error_bound;
  });
  EnergyReport out;
  out.trials = opts.trials;
  double q_err = 0.0;
  for (std::size_t i = 0; i < reach.size(); ++i) {
    out.reach_excess = std::max(out.reach_excess, reach[i]);
    out.future_excess = std::max(out.future_excess, future[i]);
    q_err = std::max(q_err, quad[i]);
  }
  out.tolerance = tol + q_err;
  out.pass = out.reach_excess <= out.tolerance && out.future_excess <= out.tolerance;
  return out;
}

/// CSV with columns t, u1..um, x1..xn, y1..yp. CT rows hold the input of the
/// step starting at t (the last row repeats the final input).
inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << std::setprecision(17);
  const Index m = tr.u.rows(), n = tr.x.rows(), p = tr.y.rows();
  os << "t";
  for (Index i = 0; i < m; ++i) os << ",u" << i + 1;
  for (Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Index i = 0; i < p; ++i) os << ",y" << i + 1;
  os << '\n';
  for (Index k = 0; k < tr.y.cols(); ++k) {
    os << tr.times(k);
    const Index uk = std::min(k, tr.u.cols() - 1);
    for (Index i = 0; i < m; ++i) os << ',' << (uk >= 0 ? tr.u(i, uk) : 0.0);
    for (Index i = 0; i < n; ++i) os << ',' << tr.x(i, k);
    for (Index i = 0; i < p; ++i) os << ',' << tr.y(i, k);
    os << '\n';
  }
  return os.str();
}

}  // namespace lssbalred
