#include "support.hpp"

using namespace lssbalred;
using namespace testing_support;

namespace {

const Matrix kLambda = Eigen::Vector3d(2, 1, 0.5).asDiagonal();

LssModel strong_model(Index n, Index d, std::uint64_t seed, double radius = 0.2) {
  StableModelSpec spec;
  spec.time_domain = TimeDomain::kDiscrete;
  spec.n = n;
  spec.num_modes = d;
  spec.kind = StabilityKind::kStrong;
  spec.strong_radius = radius;
  return random_stable_model(spec, seed);
}

/// Depth at which the geometric tail rho^L drops below 1e-12.
int oracle_depth(const LssModel& model) {
  const double rho = check_strong_stability(model).kronecker_spectral_radius;
  return static_cast<int>(std::ceil(std::log(1e-12) / std::log(rho)));
}

}  // namespace

TEST(LmiGrammian, ScalarTightened) {
  const auto m = scalar_model(TimeDomain::kContinuous, {-1.0});
  const auto pair = lmi_grammians(m);
  EXPECT_GE(pair.P(0, 0), 0.5);
  EXPECT_LE(pair.P(0, 0), 0.5 + 1e-4);
  EXPECT_GE(pair.Q(0, 0), 0.5);
  EXPECT_LE(pair.Q(0, 0), 0.5 + 1e-4);
  EXPECT_EQ(pair.provenance, Provenance::kLmi);
}

TEST(LmiGrammian, UnstableScalarFails) {
  const auto m = scalar_model(TimeDomain::kDiscrete, {1.5});
  EXPECT_THROW(lmi_grammian(m, GrammianKind::kObservability), InfeasibleError);
}

TEST(LmiGrammian, ExampleOneSeededUntightened) {
  GrammianOptions opts;
  opts.tighten = false;
  opts.seed = kLambda;
  const auto m = example_one();
  const Matrix q = lmi_grammian(m, GrammianKind::kObservability, opts);
  EXPECT_TRUE(check_membership(m, q, SetKind::kObservability).member());
  EXPECT_TRUE(check_membership(m, kLambda, SetKind::kObservability).member());
  EXPECT_TRUE(check_membership(m, kLambda, SetKind::kControllability).member());
}

TEST(CertificateGrammian, ScalarObservability) {
  const auto m = scalar_model(TimeDomain::kContinuous, {-1.0});
  StabilityCertificate cert;
  cert.P = Matrix::Identity(1, 1);
  const Matrix q = grammian_from_certificate(cert, m, GrammianKind::kObservability, 1e-9);
  EXPECT_NEAR(q(0, 0), 0.5, 1e-5);
  EXPECT_GT(q(0, 0), 0.5);
  const Matrix p = grammian_from_certificate(cert, m, GrammianKind::kControllability, 1e-9);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-5);
}

TEST(CertificateGrammian, RejectsBadCertificate) {
  const auto m = scalar_model(TimeDomain::kContinuous, {1.0});
  StabilityCertificate cert;
  cert.P = Matrix::Identity(1, 1);
  EXPECT_THROW(grammian_from_certificate(cert, m, GrammianKind::kObservability), InputError);
}

TEST(CertificateGrammian, GeneratedTwoModeCt) {
  StableModelSpec spec;
  spec.n = 3;
  const auto m = random_stable_model(spec, 11);
  const auto pair = certificate_grammians(m);
  EXPECT_TRUE(check_membership(m, pair.P, SetKind::kControllability).strict_member(pair.margin));
  EXPECT_TRUE(check_membership(m, pair.Q, SetKind::kObservability).strict_member(pair.margin));
}

TEST(NiceGrammians, ScalarClosedForms) {
  const auto two = nice_grammians(scalar_model(TimeDomain::kDiscrete, {0.3, 0.4}));
  EXPECT_NEAR(two.P(0, 0), 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(two.Q(0, 0), 8.0 / 3.0, 1e-12);
  const auto one = nice_grammians(scalar_model(TimeDomain::kDiscrete, {0.5}));
  EXPECT_NEAR(one.P(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(one.Q(0, 0), 4.0 / 3.0, 1e-12);
}

TEST(NiceGrammians, Errors) {
  EXPECT_THROW(nice_grammians(example_one()), InputError);
  EXPECT_THROW(nice_grammians(scalar_model(TimeDomain::kDiscrete, {0.8, 0.8})), InputError);
}

TEST(NiceGrammians, SeriesOracle) {
  const auto m = scalar_model(TimeDomain::kDiscrete, {0.5});
  EXPECT_NEAR(nice_grammian_series_oracle(m, 3).P(0, 0), 1.328125, 1e-15);
  const auto two = scalar_model(TimeDomain::kDiscrete, {0.3, 0.4}, 1.0, 2.0);
  const auto d0 = nice_grammian_series_oracle(two, 0);
  EXPECT_NEAR(d0.P(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(d0.Q(0, 0), 8.0, 1e-15);
  EXPECT_THROW(nice_grammian_series_oracle(scalar_model(TimeDomain::kDiscrete, {0.1, 0.1, 0.1}), 20), InputError);
}

TEST(NiceGrammians, OracleMonotoneAndConvergent) {
  const auto m = strong_model(2, 2, 5);
  Matrix prev = Matrix::Zero(2, 2);
  for (int d = 0; d < 6; ++d) {
    const Matrix p = nice_grammian_series_oracle(m, d).P;
    EXPECT_GE(linalg::min_eigenvalue(p - prev), -1e-12);
    prev = p;
  }
  const auto exact = nice_grammians(m);
  const auto series = nice_grammian_series_oracle(m, oracle_depth(m));
  EXPECT_LT((exact.P - series.P).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((exact.Q - series.Q).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(NiceGrammians, PositiveDefiniteIffMinimal) {
  std::mt19937_64 rng(3);
  const auto m = strong_model(2, 2, 9);
  const auto pm = nice_grammians(m);
  EXPECT_GT(linalg::min_eigenvalue(pm.P), 1e-10);
  EXPECT_GT(linalg::min_eigenvalue(pm.Q), 1e-10);
  const auto ur = pad_unreachable(m, 1, 0.1, rng);
  const auto pu = nice_grammians(ur);
  EXPECT_LT(linalg::min_eigenvalue(pu.P), 1e-10);
  EXPECT_GT(linalg::min_eigenvalue(pu.Q), 1e-10);
  EXPECT_FALSE(is_span_reachable(ur));
  const auto uo = pad_unobservable(m, 1, 0.1, rng);
  const auto po = nice_grammians(uo);
  EXPECT_GT(linalg::min_eigenvalue(po.P), 1e-10);
  EXPECT_LT(linalg::min_eigenvalue(po.Q), 1e-10);
}

TEST(AveragedGrammians, StrongModelPassesMembership) {
  const auto m = strong_model(3, 2, 21);
  const auto pair = averaged_grammians(m);
  EXPECT_LE(linalg::max_eigenvalue(families::averaged_residual(m, pair.P, SetKind::kControllability)), 0.0);
  EXPECT_TRUE(check_membership(m, pair.P, SetKind::kControllability).member());
  EXPECT_TRUE(check_membership(m, pair.Q, SetKind::kObservability).member());
}

TEST(AveragedGrammians, InfeasibleScalar) {
  EXPECT_THROW(averaged_grammians(scalar_model(TimeDomain::kDiscrete, {0.8, 0.8})), InfeasibleError);
}

TEST(SingularValues, ClosedForms) {
  const Vector s = singular_values(kLambda, kLambda);
  EXPECT_NEAR(s(0), 2.0, 1e-14);
  EXPECT_NEAR(s(1), 1.0, 1e-14);
  EXPECT_NEAR(s(2), 0.5, 1e-14);
  const Vector ones = singular_values(Matrix::Identity(4, 4), Matrix::Identity(4, 4));
  EXPECT_TRUE(ones.isApprox(Vector::Ones(4)));
  EXPECT_THROW(singular_values(-Matrix::Identity(2, 2), Matrix::Identity(2, 2)), InputError);
}

TEST(SingularValues, MatchProductEigenvalues) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const Matrix p = random_spd(4, rng), q = random_spd(4, rng);
    Eigen::EigenSolver<Matrix> es(p * q);
    Vector ev = es.eigenvalues().real().cwiseSqrt();
    std::sort(ev.data(), ev.data() + 4, std::greater<>());
    const Vector s = singular_values(p, q);
    EXPECT_LT((ev - s).cwiseAbs().maxCoeff(), 1e-10 * ev(0));
  }
}

TEST(Membership, UnstableScalarResidual) {
  const auto m = scalar_model(TimeDomain::kDiscrete, {1.5});
  const auto r = check_membership(m, Matrix::Identity(1, 1), SetKind::kStability);
  EXPECT_FALSE(r.member());
  EXPECT_NEAR(r.worst, 1.25, 1e-14);
}

TEST(Transport, IdentityAndDiagonal) {
  const auto m = example_one();
  GrammianPair pair;
  pair.P = kLambda;
  pair.Q = kLambda;
  const auto same = transport_pair(pair, make_isomorphism(Matrix::Identity(3, 3)));
  EXPECT_TRUE(same.P.isApprox(pair.P));
  const auto iso = make_isomorphism(Eigen::Vector3d(2, 1, 1).asDiagonal());
  const auto m2 = apply_isomorphism(m, iso);
  const auto moved = transport_pair(pair, iso);
  EXPECT_TRUE(check_membership(m2, moved.P, SetKind::kControllability).member());
  EXPECT_TRUE(check_membership(m2, moved.Q, SetKind::kObservability).member());
  EXPECT_LT((singular_values(moved) - Eigen::Vector3d(2, 1, 0.5)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Transport, RandomInvariance) {
  std::mt19937_64 rng(4);
  StableModelSpec spec;
  spec.n = 3;
  const auto m = random_stable_model(spec, 33);
  const auto pair = lmi_grammians(m);
  const auto iso = make_isomorphism(random_invertible(3, rng));
  const auto m2 = apply_isomorphism(m, iso);
  const auto moved = transport_pair(pair, iso);
  EXPECT_TRUE(check_membership(m2, moved.P, SetKind::kControllability).member());
  EXPECT_TRUE(check_membership(m2, moved.Q, SetKind::kObservability).member());
  const Vector s1 = singular_values(pair), s2 = singular_values(moved);
  EXPECT_LT((s1 - s2).cwiseAbs().maxCoeff(), 1e-8 * s1(0));
}

TEST(Duality, ObservabilityIsDualControllability) {
  StableModelSpec spec;
  spec.n = 3;
  const auto m = random_stable_model(spec, 2);
  const Matrix q = lmi_grammian(m, GrammianKind::kObservability);
  EXPECT_TRUE(check_membership(dual_system(m), q, SetKind::kControllability).member());
}

TEST(TraceIdentity, StrongModel) {
  const auto m = strong_model(3, 2, 17);
  const auto pair = nice_grammians(m);
  const double lhs = (pair.P * pair.Q).trace();
  const int depth = oracle_depth(m);
  EXPECT_NEAR(lhs, hankel_frobenius_sum(m, depth), 1e-6);
}

TEST(TraceIdentity, LevelRecursionMatchesBlocks) {
  const auto m = strong_model(2, 2, 4);
  double brute = 0.0;
  std::vector<Word> words{{}};
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].size() < 2)
      for (Index q = 0; q < 2; ++q) {
        Word w = words[i];
        w.push_back(q);
        words.push_back(w);
      }
  }
  for (const auto& s : words)
    for (const auto& v : words) brute += hankel_block(m, s, v).squaredNorm();
  EXPECT_NEAR(hankel_frobenius_sum(m, 2), brute, 1e-12 * std::max(1.0, brute));
}

TEST(MinimizeWithGrammians, InterlacingOnPaddedModel) {
  std::mt19937_64 rng(12);
  StableModelSpec spec;
  spec.n = 3;
  const auto base = random_stable_model(spec, 40);
  const auto padded = pad_unobservable(pad_unreachable(base, 1, -1.0, rng), 1, -1.5, rng);
  const auto pair = lmi_grammians(padded);
  const auto mp = minimize_with_grammians(padded, pair);
  ASSERT_EQ(mp.model.n(), 3);
  EXPECT_TRUE(markov_equivalent(mp.model, minimize(padded), 4));
  EXPECT_TRUE(check_membership(mp.model, mp.pair.P, SetKind::kControllability).member());
  EXPECT_TRUE(check_membership(mp.model, mp.pair.Q, SetKind::kObservability).member());
  const Vector sigma = singular_values(pair), lambda = singular_values(mp.pair);
  const Index n = sigma.size(), k = lambda.size();
  for (Index i = 0; i < k; ++i) {
    EXPECT_LE(sigma(n - k + i), lambda(i) + 1e-7);
    EXPECT_LE(lambda(i), sigma(i) + 1e-7);
  }
}

TEST(MinimizeWithGrammians, MinimalModelUnchangedSpectrum) {
  const auto m = strong_model(3, 2, 8);
  const auto pair = nice_grammians(m);
  const auto mp = minimize_with_grammians(m, pair);
  ASSERT_EQ(mp.model.n(), 3);
  EXPECT_LT((singular_values(pair) - singular_values(mp.pair)).cwiseAbs().maxCoeff(), 1e-10);
}
