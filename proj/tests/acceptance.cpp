// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each check reports the worst observed quantity next to its limit.

#include "lssbalred/lssbalred.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

using namespace lssbalred;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

LssModel scalar_model(TimeDomain td, std::vector<double> as, double b = 1.0, double c = 1.0) {
  LssModel m;
  m.time_domain = td;
  for (double a : as) m.modes.push_back(Mode{Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, c)});
  return m;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

Index uniform(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

LssModel pad_unreachable(const LssModel& model, Index extra, double decay, std::mt19937_64& rng) {
  LssModel out;
  out.time_domain = model.time_domain;
  const Index n = model.n();
  for (const auto& md : model.modes) {
    Matrix a = Matrix::Zero(n + extra, n + extra);
    a.topLeftCorner(n, n) = md.A;
    a.bottomRightCorner(extra, extra) = decay * Matrix::Identity(extra, extra);
    a.topRightCorner(n, extra) = 0.1 * random_matrix(n, extra, rng);
    Matrix b = Matrix::Zero(n + extra, md.B.cols());
    b.topRows(n) = md.B;
    Matrix c(md.C.rows(), n + extra);
    c << md.C, random_matrix(md.C.rows(), extra, rng);
    out.modes.push_back(Mode{a, b, c});
  }
  return out;
}

LssModel pad_unobservable(const LssModel& model, Index extra, double decay, std::mt19937_64& rng) {
  return dual_system(pad_unreachable(dual_system(model), extra, decay, rng));
}

/// Unreachable and/or unobservable padding with a decay suited to the domain.
LssModel pad_defective(const LssModel& model, int which, std::mt19937_64& rng) {
  const double decay = model.discrete() ? 0.1 : -1.0;
  if (which == 0) return pad_unreachable(model, 1, decay, rng);
  if (which == 1) return pad_unobservable(model, 1, decay, rng);
  return pad_unobservable(pad_unreachable(model, 1, decay, rng), 1, decay, rng);
}

LssModel quadratic_model(TimeDomain td, Index n, Index d, Index m, Index p, std::uint64_t seed) {
  StableModelSpec spec;
  spec.time_domain = td;
  spec.n = n;
  spec.num_modes = d;
  spec.m = m;
  spec.p = p;
  return random_stable_model(spec, seed);
}

LssModel strong_model(Index n, Index d, double radius, std::uint64_t seed) {
  StableModelSpec spec;
  spec.time_domain = TimeDomain::kDiscrete;
  spec.kind = StabilityKind::kStrong;
  spec.n = n;
  spec.num_modes = d;
  spec.strong_radius = radius;
  return random_stable_model(spec, seed);
}

bool positive_definite(const Matrix& x) {
  return linalg::min_eigenvalue(x) > 1e-9 * std::max(1.0, x.norm());
}

SimOptions sim(const LssModel& model, int trials, std::uint64_t seed) {
  SimOptions o;
  o.trials = trials;
  o.seed = seed;
  o.h = 0.01;
  o.horizon = model.discrete() ? 200.0 : 20.0;
  return o;
}

// ---------------------------------------------------------------------------

Outcome example_golden() {
  Outcome out;
  const auto t0 = Clock::now();
  const LssModel m = example_one();
  GrammianPair pair;
  pair.P = Eigen::Vector3d(2, 1, 0.5).asDiagonal();
  pair.Q = pair.P;
  const auto obs = check_membership(m, pair.P, SetKind::kObservability);
  const auto ctrl = check_membership(m, pair.P, SetKind::kControllability);
  out.require(obs.positive_definite && obs.worst < 0.0, "Lambda not strictly in O");
  out.require(ctrl.positive_definite && ctrl.worst < 0.0, "Lambda not strictly in C");
  const auto red = truncate(balance(m, pair), 2);
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << -2, 0, 0, -1;
  b << 1, 0;
  c << 1, 1;
  const auto& md = red.reduced_model.modes.front();
  out.require(md.A == a && md.B == b && md.C == c, "reduced matrices differ");
  out.require(!is_minimal(red.reduced_model), "reduced model reported minimal");
  out.require(red.apriori_bound == 1.0, "bound is not exactly 1");
  const double secs = seconds_since(t0);
  out.require(secs < 1.0, "runtime over 1 s");
  out.detail << "O residual " << obs.worst << ", C residual " << ctrl.worst << ", bound " << red.apriori_bound << ", "
             << secs << " s";
  return out;
}

Outcome error_bound_monte_carlo() {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int models = 0, reductions = 0, skipped_ties = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  double worst_ratio_over_bound = 0.0;
  auto run = [&](TimeDomain td, std::uint64_t seed) {
    const bool dt = td == TimeDomain::kDiscrete;
    const Index n = uniform(rng, 2, 6), d = uniform(rng, 1, 3);
    const Index mi = uniform(rng, 1, 2), po = uniform(rng, 1, 2);
    const auto model = quadratic_model(td, n, d, mi, po, seed);
    const auto bal = balance(model, lmi_grammians(model));
    ++models;
    for (Index r = 1; r < n; ++r) {
      if (tied_at(bal.lambda, r)) {
        ++skipped_ties;
        continue;
      }
      const auto red = truncate(bal, r);
      const auto rep = verify_error_bound(model, red.reduced_model, red.apriori_bound, sim(model, 50, seed + 17 * r), 1e-5);
      ++reductions;
      worst_margin = std::max(worst_margin, rep.worst_ratio - red.apriori_bound - rep.slack);
      if (red.apriori_bound > 0) worst_ratio_over_bound = std::max(worst_ratio_over_bound, rep.worst_ratio / red.apriori_bound);
      out.require(rep.pass, std::string(dt ? "DT" : "CT") + " seed " + std::to_string(seed) + " r " + std::to_string(r));
    }
  };
  for (std::uint64_t s = 0; s < 100; ++s) run(TimeDomain::kDiscrete, 1000 + s);
  for (std::uint64_t s = 0; s < 50; ++s) run(TimeDomain::kContinuous, 2000 + s);
  const double secs = seconds_since(t0);
  out.require(secs < 300.0, "runtime over 5 min");
  out.detail << models << " models, " << reductions << " reductions x 50 trials (" << skipped_ties
             << " tied orders skipped), max ratio/bound " << worst_ratio_over_bound << ", max excess over bound+slack "
             << worst_margin << ", " << secs << " s";
  return out;
}

Outcome trace_identity() {
  Outcome out;
  double worst = 0.0;
  int max_len = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Index n = 2 + static_cast<Index>(s % 3), d = 1 + static_cast<Index>(s % 3);
    const auto m = strong_model(n, d, 0.2 + 0.02 * static_cast<double>(s % 10), 3000 + s);
    const auto pair = nice_grammians(m);
    const double rho = check_strong_stability(m).kronecker_spectral_radius;
    // Level k of the combined word length contributes at most
    // (k+1) ||B~||_F^2 ||C~||_F^2 rho^k to the omitted part.
    const double scale = m.stacked_B().squaredNorm() * m.stacked_C().squaredNorm();
    int len = 0;
    auto tail = [&](int l) {
      double t = 0.0, pk = std::pow(rho, l + 1);
      for (int k = l + 1; pk > 1e-300 && k < l + 100000; ++k, pk *= rho) t += (k + 1) * pk;
      return scale * t;
    };
    while (tail(len) >= 1e-8) ++len;
    max_len = std::max(max_len, len);
    const double err = std::abs((pair.P * pair.Q).trace() - hankel_frobenius_sum(m, len));
    worst = std::max(worst, err);
    out.require(err <= 1e-6, "seed " + std::to_string(3000 + s));
  }
  out.detail << "30 models, max |tr(PQ) - Hankel sum| " << worst << " (limit 1e-6), word length up to " << max_len;
  return out;
}

Outcome invariance() {
  Outcome out;
  std::mt19937_64 rng(4);
  double worst_sv = 0.0;
  int transports = 0, non_members = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const TimeDomain td = s % 2 ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
    const auto m = quadratic_model(td, uniform(rng, 2, 4), uniform(rng, 1, 3), 1, 1, 4000 + s);
    Matrix t = random_matrix(m.n(), m.n(), rng) + 2.0 * Matrix::Identity(m.n(), m.n());
    const auto iso = make_isomorphism(t);
    const auto m2 = apply_isomorphism(m, iso);
    const auto cert = check_quadratic_stability(m);
    out.require(cert.has_value(), "no stability certificate");
    const auto pair = lmi_grammians(m);
    const auto gain = l2_gain_upper_bound(m);
    struct Case {
      SetKind set;
      Matrix x;
      double gamma;
    };
    std::vector<Case> cases{{SetKind::kObservability, pair.Q, 0.0},
                            {SetKind::kControllability, pair.P, 0.0},
                            {SetKind::kGain, gain.certificate.P, gain.certificate.gamma}};
    if (cert) cases.push_back({SetKind::kStability, cert->P, 0.0});
    for (const auto& c : cases) {
      const bool before = check_membership(m, c.x, c.set, c.gamma).member();
      const bool after = check_membership(m2, transport(c.x, iso, c.set), c.set, c.gamma).member();
      out.require(before && after, std::string("member lost under transport: ") + families::to_string(c.set));
      ++transports;
      // A matrix far too small for the set stays outside after transport.
      const Matrix small = 1e-6 * c.x;
      if (c.set != SetKind::kStability && !check_membership(m, small, c.set, c.gamma).member()) {
        ++non_members;
        out.require(!check_membership(m2, transport(small, iso, c.set), c.set, c.gamma).member(),
                    "non-member became member");
      }
    }
    const Vector s1 = singular_values(pair), s2 = singular_values(transport_pair(pair, iso));
    const double diff = (s1 - s2).cwiseAbs().maxCoeff();
    worst_sv = std::max(worst_sv, diff);
    out.require(diff <= 1e-8, "singular values moved, seed " + std::to_string(4000 + s));
  }
  double worst_interlace = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const TimeDomain td = s % 2 ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
    const auto base = quadratic_model(td, uniform(rng, 2, 4), 2, 1, 1, 4500 + s);
    const auto padded = pad_defective(base, static_cast<int>(s % 3), rng);
    const auto pair = lmi_grammians(padded);
    const auto mp = minimize_with_grammians(padded, pair);
    out.require(check_membership(mp.model, mp.pair.P, SetKind::kControllability).member() &&
                    check_membership(mp.model, mp.pair.Q, SetKind::kObservability).member(),
                "minimal pair not grammians");
    const Vector sigma = singular_values(pair), lambda = singular_values(mp.pair);
    const Index n = sigma.size(), k = lambda.size();
    for (Index i = 0; i < k; ++i) {
      worst_interlace = std::max({worst_interlace, sigma(n - k + i) - lambda(i), lambda(i) - sigma(i)});
      out.require(sigma(n - k + i) <= lambda(i) + 1e-7 && lambda(i) <= sigma(i) + 1e-7,
                  "interlacing, seed " + std::to_string(4500 + s));
    }
  }
  out.detail << transports << " transported members, " << non_members << " non-members kept out, max singular value "
             << "drift " << worst_sv << " (limit 1e-8); interlacing on 20 padded models, worst violation "
             << worst_interlace << " (limit 1e-7)";
  return out;
}

Outcome nice_grammian_suite() {
  Outcome out;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Index d = 2 + static_cast<Index>(s % 2);
    const auto m = strong_model(2 + static_cast<Index>(s % 3), d, d == 2 ? 0.3 : 0.2, 5000 + s);
    const double rho = check_strong_stability(m).kronecker_spectral_radius;
    int depth = static_cast<int>(std::ceil(std::log(1e-12) / std::log(rho)));
    depth = std::min(depth, d == 2 ? 22 : 14);
    const auto exact = nice_grammians(m);
    const auto series = nice_grammian_series_oracle(m, depth);
    const double err = std::max((exact.P - series.P).cwiseAbs().maxCoeff(), (exact.Q - series.Q).cwiseAbs().maxCoeff());
    worst = std::max(worst, err);
    out.require(err <= 1e-8, "series mismatch, seed " + std::to_string(5000 + s));
  }
  std::mt19937_64 rng(5);
  int agree = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    auto m = strong_model(2 + static_cast<Index>(s % 2), 2, 0.3, 5500 + s);
    if (s >= 20) m = pad_defective(m, static_cast<int>(s % 3), rng);
    const auto pair = nice_grammians(m);
    const bool pd = positive_definite(pair.P) && positive_definite(pair.Q);
    const bool ok = pd == is_minimal(m) && positive_definite(pair.P) == is_span_reachable(m) &&
                    positive_definite(pair.Q) == is_observable(m) && is_minimal(m) == (s < 20);
    agree += ok;
    out.require(ok, "PD/minimality disagreement, case " + std::to_string(s));
  }
  const double one = nice_grammians(scalar_model(TimeDomain::kDiscrete, {0.5})).P(0, 0);
  const double two = nice_grammians(scalar_model(TimeDomain::kDiscrete, {0.3, 0.4})).P(0, 0);
  out.require(std::abs(one - 4.0 / 3.0) <= 1e-12 && std::abs(two - 8.0 / 3.0) <= 1e-12, "scalar closed forms");
  out.detail << "series vs Kronecker max diff " << worst << " (limit 1e-8) on 30; PD iff minimal on " << agree
             << "/40; scalar errors " << std::abs(one - 4.0 / 3.0) << ", " << std::abs(two - 8.0 / 3.0);
  return out;
}

Outcome gain_suite() {
  Outcome out;
  const double ct = l2_gain_upper_bound(scalar_model(TimeDomain::kContinuous, {-1.0})).gamma_star;
  const double dt = l2_gain_upper_bound(scalar_model(TimeDomain::kDiscrete, {0.5})).gamma_star;
  out.require(ct >= 1.0 && ct <= 1.002, "scalar CT gamma");
  out.require(dt >= 2.0 && dt <= 2.004, "scalar DT gamma");
  std::mt19937_64 rng(6);
  double gain_excess = -std::numeric_limits<double>::infinity(), hankel_excess = gain_excess, min_excess = gain_excess;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const TimeDomain td = s % 2 ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
    const auto m = quadratic_model(td, uniform(rng, 2, 4), uniform(rng, 1, 3), 1, 1, 6000 + s);
    const double gamma = l2_gain_upper_bound(m).gamma_star;
    auto opts = sim(m, 50, s + 1);
    opts.horizon = m.discrete() ? 300.0 : 30.0;
    const double emp = empirical_gain(m, opts).lower_bound;
    const double hank = empirical_hankel_gain(m, opts).lower_bound;
    const double smax = hankel_upper_bound(lmi_grammians(m));
    const auto padded = pad_defective(m, static_cast<int>(s % 3), rng);
    const double g_pad = l2_gain_upper_bound(padded).gamma_star;
    const double g_min = l2_gain_upper_bound(minimize(padded)).gamma_star;
    gain_excess = std::max(gain_excess, emp - gamma);
    hankel_excess = std::max(hankel_excess, hank - smax);
    min_excess = std::max(min_excess, g_min - g_pad);
    out.require(emp <= gamma + 1e-3, "empirical gain above gamma*, seed " + std::to_string(6000 + s));
    out.require(hank <= smax + 1e-3, "empirical Hankel gain above sigma_max, seed " + std::to_string(6000 + s));
    out.require(g_min <= g_pad + 1e-3, "minimization increased gamma*, seed " + std::to_string(6000 + s));
  }
  out.detail << "scalar gamma* CT " << ct << ", DT " << dt << "; over 20 models max(emp - gamma*) " << gain_excess
             << ", max(hankel - sigma_max) " << hankel_excess << ", max(gamma*_min - gamma*) " << min_excess;
  return out;
}

Outcome energy_suite() {
  Outcome out;
  std::mt19937_64 rng(7);
  int trajectories = 0;
  double reach = -std::numeric_limits<double>::infinity(), future = reach;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const TimeDomain td = s % 2 ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
    const auto m = quadratic_model(td, uniform(rng, 2, 4), uniform(rng, 1, 3), 1, 1, 7000 + s);
    const auto rep = check_energy_lemmas(m, lmi_grammians(m), sim(m, 25, s + 1), 1e-6);
    trajectories += rep.trials;
    reach = std::max(reach, rep.reach_excess);
    future = std::max(future, rep.future_excess);
    out.require(rep.pass, "seed " + std::to_string(7000 + s));
  }
  out.require(trajectories >= 500, "fewer than 500 trajectories");
  out.detail << trajectories << " trajectories on 20 models, max reach excess " << reach << ", max future excess "
             << future << " (slack 1e-6 + quadrature)";
  return out;
}

Outcome preservation_suite() {
  Outcome out;
  std::mt19937_64 rng(8);
  int truncations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const TimeDomain td = s % 2 ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
    const auto m = quadratic_model(td, uniform(rng, 2, 5), uniform(rng, 1, 3), 1, 1, 8000 + s);
    const auto pair = lmi_grammians(m);
    out.require(pair.strict, "pair not strict");
    const auto bal = balance(m, pair);
    for (Index r = 1; r < m.n(); ++r) {
      if (tied_at(bal.lambda, r)) continue;
      const auto red = truncate(bal, r);
      const auto o = check_membership(red.reduced_model, red.lambda1, SetKind::kObservability);
      const auto c = check_membership(red.reduced_model, red.lambda1, SetKind::kControllability);
      const auto st = check_membership(red.reduced_model, red.lambda1, SetKind::kStability);
      worst = std::max({worst, o.worst, c.worst, st.worst});
      out.require(o.positive_definite && o.worst < 0 && c.worst < 0 && st.worst < 0,
                  "Lambda1 not strict, seed " + std::to_string(8000 + s));
      out.require(check_quadratic_stability(red.reduced_model).has_value(), "no certificate for reduced model");
      ++truncations;
    }
  }
  double radius = 0.0;
  int defective = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = strong_model(2 + static_cast<Index>(s % 3), 1 + static_cast<Index>(s % 3), 0.9, 8500 + s);
    const auto padded = pad_defective(m, static_cast<int>(s % 3), rng);
    defective += !is_minimal(padded);
    out.require(check_strong_stability(padded).stable, "padded model not strongly stable");
    const double rho = check_strong_stability(minimize(padded)).kronecker_spectral_radius;
    radius = std::max(radius, rho);
    out.require(rho < 1.0, "minimized model lost strong stability");
  }
  out.detail << truncations << " truncations, worst Lambda1 residual " << worst << " (< 0 required); " << defective
             << "/50 non-minimal strongly stable models minimized, max radius " << radius;
  return out;
}

Outcome embedding_suite() {
  Outcome out;
  std::mt19937_64 rng(9);
  int agree = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto m = strong_model(2 + static_cast<Index>(s % 2), 1 + static_cast<Index>(s % 3), 0.4, 9000 + s);
    if (s >= 10) m = pad_defective(m, static_cast<int>(s % 3), rng);
    const auto rep = check_uncertain_minimality_equivalence(m);
    agree += rep.agree();
    out.require(rep.agree(), "minimality disagreement, case " + std::to_string(s));
  }
  double worst_member = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = strong_model(2 + static_cast<Index>(s % 3), 1 + static_cast<Index>(s % 3), 0.8, 9100 + s);
    const auto pair = averaged_grammians(m);
    const auto c = check_membership(m, pair.P, SetKind::kControllability);
    const auto o = check_membership(m, pair.Q, SetKind::kObservability);
    worst_member = std::max({worst_member, c.worst, o.worst});
    out.require(c.member() && o.member(), "averaged grammian not a grammian");
  }
  double worst_z = 0.0;
  const std::vector<std::array<double, 6>> cases{
      {0.3, 0.6, 1.0, 1.0, 1.0, 1.0}, {0.3, 0.6, 1.0, -0.5, 1.0, 2.0}, {0.9, -0.4, 1.0, 0.5, 0.7, 1.0},
      {0.5, 0.5, 2.0, 1.0, 1.0, -1.0}, {-0.7, 0.2, 1.0, 1.0, 0.3, 1.5}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    LssModel m = scalar_model(TimeDomain::kDiscrete, {c[0], c[1]});
    m.modes[0].B(0, 0) = c[2];
    m.modes[1].B(0, 0) = c[3];
    m.modes[0].C(0, 0) = c[4];
    m.modes[1].C(0, 0) = c[5];
    Matrix u = Matrix::Zero(1, 1);
    u(0, 0) = 1.0;
    const auto rep = monte_carlo_stochastic_energy(m, u, 20000, 12, 100 + i);
    const double oracle = stochastic_impulse_word_sum(m, Vector::Ones(1), 12);
    const double z = std::abs(rep.mean - oracle) / std::max(rep.standard_error, 1e-300);
    worst_z = std::max(worst_z, z);
    out.require(std::abs(rep.mean - oracle) <= 3.0 * rep.standard_error, "Monte Carlo off, case " + std::to_string(i));
  }
  out.detail << "minimality agrees on " << agree << "/20; averaged grammians worst residual " << worst_member
             << " on 20; Monte Carlo impulse energy within " << worst_z << " standard errors on 5 cases (limit 3)";
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 reference three-state example: golden reduction", example_golden},
      {"2 truncation error bound, Monte Carlo", error_bound_monte_carlo},
      {"3 trace identity tr(PQ) = Hankel sum", trace_identity},
      {"4 invariance and interlacing", invariance},
      {"5 nice grammians", nice_grammian_suite},
      {"6 gain bounds", gain_suite},
      {"7 energy inequalities", energy_suite},
      {"8 preservation under truncation and minimization", preservation_suite},
      {"9 embeddings", embedding_suite},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
