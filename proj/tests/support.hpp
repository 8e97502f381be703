#pragma once

#include "lssbalred/lssbalred.hpp"

#include <gtest/gtest.h>

#include <random>

namespace testing_support {

using namespace lssbalred;

inline LssModel scalar_model(TimeDomain td, std::vector<double> as, double b = 1.0, double c = 1.0) {
  LssModel m;
  m.time_domain = td;
  for (double a : as) m.modes.push_back(Mode{Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, c)});
  return m;
}

inline Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline Matrix random_spd(Index n, std::mt19937_64& rng) {
  const Matrix x = random_matrix(n, n, rng);
  return x * x.transpose() + 0.5 * Matrix::Identity(n, n);
}

inline Matrix random_invertible(Index n, std::mt19937_64& rng) {
  Matrix s = random_matrix(n, n, rng) + 2.0 * Matrix::Identity(n, n);
  return s;
}

/// Appends `extra` states that are never reached (B rows zero, decoupled
/// stable dynamics feeding the output).
inline LssModel pad_unreachable(const LssModel& model, Index extra, double decay, std::mt19937_64& rng) {
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

/// Appends `extra` states that never influence the output.
inline LssModel pad_unobservable(const LssModel& model, Index extra, double decay, std::mt19937_64& rng) {
  return dual_system(pad_unreachable(dual_system(model), extra, decay, rng));
}

}  // namespace testing_support
