#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wgphase/lm.hpp"
#include "wgphase/pathlength.hpp"
#include "wgphase/random.hpp"

using namespace wgphase;

namespace {

Bounds open_box(Eigen::Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

InterferometerConfig quiet_config(double delta_l) {
  InterferometerConfig cfg;
  cfg.delta_l = delta_l;
  cfg.phi_env = ConstantPhase{0.4};
  return cfg;
}

FringeTrace two_tone(double l1, double a1, double l2, double a2, std::size_t n, double span) {
  FringeTrace t;
  t.freq = linspace(0.0, span, n);
  for (double f : t.freq)
    t.counts.push_back(1000.0 + a1 * std::cos(kTwoPi * f * l1 / kSpeedOfLightMPerNs) +
                       a2 * std::cos(kTwoPi * f * l2 / kSpeedOfLightMPerNs + 0.3));
  return t;
}

}  // namespace

TEST(LevenbergMarquardt, LinearModelExact) {
  Eigen::VectorXd x(10), y(10);
  for (int i = 0; i < 10; ++i) {
    x[i] = i;
    y[i] = 2.0 * i - 1.0;
  }
  auto model = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return (p[0] * x.array() + p[1] - y.array()).matrix(); };
  const auto fit = lm_minimize(model, vec({0.0, 0.0}), open_box(2));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params[0], 2.0, 1e-12);
  EXPECT_NEAR(fit.params[1], -1.0, 1e-12);
  EXPECT_LT(fit.chi2, 1e-24);
}

TEST(LevenbergMarquardt, SinusoidKnownFrequency) {
  const double w = 1.7;
  Eigen::VectorXd x(200), y(200);
  for (int i = 0; i < 200; ++i) {
    x[i] = 0.05 * i;
    y[i] = 3.0 + 1.2 * std::cos(w * x[i] + 0.8);
  }
  auto model = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return (p[0] + p[1] * (w * x.array() + p[2]).cos() - y.array()).matrix();
  };
  const auto fit = lm_minimize(model, vec({2.0, 1.0, 0.3}), open_box(3));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params[0], 3.0, 1e-10);
  EXPECT_NEAR(fit.params[1], 1.2, 1e-10);
  EXPECT_NEAR(fit.params[2], 0.8, 1e-10);
}

TEST(LevenbergMarquardt, JacobianMatchesFivePointStencil) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(6, [&] { return u(rng); });
    auto model = [&](const Eigen::VectorXd& p) {
      Eigen::VectorXd r(4);
      r[0] = std::sin(c[0] * p[0]) + p[1] * p[1] * c[1];
      r[1] = std::exp(0.3 * c[2] * p[0] * p[1]) - p[2];
      r[2] = std::atan(c[3] * p[2] + p[0]) * c[4];
      r[3] = p[0] * p[1] * p[2] + c[5] * std::cos(p[1]);
      return r;
    };
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return u(rng); });
    const Eigen::MatrixXd jac = finite_difference_jacobian(model, x, open_box(3));
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double h = 1e-3;
      auto at = [&](double s) {
        Eigen::VectorXd xs = x;
        xs[j] += s * h;
        return model(xs);
      };
      const Eigen::VectorXd ref = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
      for (Eigen::Index i = 0; i < 4; ++i)
        EXPECT_NEAR(jac(i, j), ref[i], 1e-6 * std::max(1.0, std::abs(ref[i]))) << "trial " << trial;
    }
  }
}

TEST(LevenbergMarquardt, OneSidedDifferenceAtBound) {
  auto model = [](const Eigen::VectorXd& p) { return vec({p[0] * p[0] - 3.0 * p[0]}); };
  Bounds b{vec({1.0}), vec({5.0})};
  const auto jac = finite_difference_jacobian(model, vec({1.0}), b);
  EXPECT_NEAR(jac(0, 0), -1.0, 1e-5);
  const auto jac_hi = finite_difference_jacobian(model, vec({5.0}), b);
  EXPECT_NEAR(jac_hi(0, 0), 7.0, 1e-4);
}

TEST(LevenbergMarquardt, BoundsPinParameter) {
  auto model = [](const Eigen::VectorXd& p) { return vec({p[0] - 3.0, p[1] + 1.0}); };
  Bounds b{vec({0.0, 0.0}), vec({2.0, 4.0})};
  const auto fit = lm_minimize(model, vec({1.0, 1.0}), b);
  EXPECT_DOUBLE_EQ(fit.params[0], 2.0);
  EXPECT_DOUBLE_EQ(fit.params[1], 0.0);
  EXPECT_TRUE(fit.at_bound[0]);
  EXPECT_TRUE(fit.at_bound[1]);
}

TEST(LevenbergMarquardt, RejectsInitialPointOutsideBounds) {
  auto model = [](const Eigen::VectorXd& p) { return p; };
  Bounds b{vec({0.0}), vec({1.0})};
  EXPECT_THROW(lm_minimize(model, vec({2.0}), b), InputError);
}

TEST(LevenbergMarquardt, SingularNormalEquationsWarn) {
  // The second parameter never enters the residual.
  auto model = [](const Eigen::VectorXd& p) { return vec({p[0] - 1.0, 2.0 * p[0] - 2.0}); };
  const auto fit = lm_minimize(model, vec({0.0, 5.0}), open_box(2));
  EXPECT_NEAR(fit.params[0], 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(fit.params[1], 5.0);
  ASSERT_FALSE(fit.warnings.empty());
  EXPECT_NE(fit.warnings.front().find("singular"), std::string::npos);
  EXPECT_LT(fit.conditioning, 1e-10);
}

TEST(LevenbergMarquardt, IterationLimitReportsNotConverged) {
  auto rosenbrock = [](const Eigen::VectorXd& p) { return vec({10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]}); };
  LmOptions opts;
  opts.max_iter = 3;
  const auto fit = lm_minimize(rosenbrock, vec({-1.2, 1.0}), open_box(2), opts);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.n_iter, 3);
  const auto full = lm_minimize(rosenbrock, vec({-1.2, 1.0}), open_box(2));
  EXPECT_TRUE(full.converged);
  EXPECT_NEAR(full.params[0], 1.0, 1e-8);
}

TEST(LevenbergMarquardt, CovarianceMatchesOrdinaryLeastSquares) {
  auto eng = counter_engine(7, 0, 0);
  std::normal_distribution<double> g(0.0, 0.3);
  const int n = 40;
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x = 0.1 * i;
    design.row(i) << 1.0, x, x * x;
    y[i] = 0.5 - 1.5 * x + 0.25 * x * x + g(eng);
  }
  auto model = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return design * p - y; };
  const auto fit = lm_minimize(model, Eigen::VectorXd::Zero(3), open_box(3));
  const Eigen::MatrixXd xtx = design.transpose() * design;
  const Eigen::VectorXd ols = xtx.ldlt().solve(design.transpose() * y);
  const double s2 = (design * ols - y).squaredNorm() / (n - 3);
  const Eigen::MatrixXd cov = s2 * xtx.inverse();
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(std::abs(fit.params[i] - ols[i]), 1e-6 * std::sqrt(cov(i, i)));
  EXPECT_LT((fit.covariance - cov).norm() / cov.norm(), 1e-6);

  EXPECT_LT((fit.covariance - fit.covariance.transpose()).norm(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);
  EXPECT_GE(fit.chi2, 0.0);
}

TEST(PathLength, RecoversDeltaLOverThirtyGigahertz) {
  const auto sweep = linspace(0.0, 30.0, 30001);
  const auto trace = fringe_trace(quiet_config(2.78), EmitterParams{}, sweep, false);
  const auto est = estimate_path_length_fft(trace);
  EXPECT_LT(std::abs(est.delta_l - 2.78) / 2.78, 5e-3);
  EXPECT_TRUE(est.warnings.empty());

  const auto noisy = apply_shot_noise(trace, 3);
  EXPECT_LT(std::abs(estimate_path_length_fft(noisy).delta_l - 2.78) / 2.78, 5e-3);
}

TEST(PathLength, ConstantTraceHasNoFringe) {
  FringeTrace t;
  t.freq = linspace(0.0, 30.0, 4001);
  t.counts.assign(t.freq.size(), 1234.0);
  EXPECT_THROW(estimate_path_length_fft(t), NoFringeError);

  auto cfg = quiet_config(2.78);
  cfg.visibility = 0.0;
  const auto flat = apply_shot_noise(fringe_trace(cfg, EmitterParams{}, t.freq, false), 11);
  EXPECT_THROW(estimate_path_length_fft(flat), NoFringeError);
}

TEST(PathLength, DominantComponentWins) {
  const auto t = two_tone(2.78, 100.0, 1.39, 30.0, 20001, 30.0);
  EXPECT_NEAR(estimate_path_length_fft(t).delta_l, 2.78, 0.005 * 2.78);
  const auto swapped = two_tone(2.78, 30.0, 1.39, 100.0, 20001, 30.0);
  EXPECT_NEAR(estimate_path_length_fft(swapped).delta_l, 1.39, 0.005 * 1.39);
}

TEST(PathLength, TiedPeaksPickShorterPathWithWarning) {
  const auto t = two_tone(2.78, 100.0, 1.39, 100.0, 20001, 30.0);
  const auto est = estimate_path_length_fft(t);
  EXPECT_NEAR(est.delta_l, 1.39, 0.005 * 1.39);
  ASSERT_FALSE(est.warnings.empty());
}

TEST(PathLength, ScalesLinearly) {
  const auto sweep = linspace(0.0, 30.0, 60001);
  for (double l : {0.5, 1.0, 2.0, 2.78, 5.0}) {
    const double a = estimate_path_length_fft(fringe_trace(quiet_config(l), EmitterParams{}, sweep, false)).delta_l;
    const double b =
        estimate_path_length_fft(fringe_trace(quiet_config(2.0 * l), EmitterParams{}, sweep, false)).delta_l;
    EXPECT_NEAR(b / a, 2.0, 2.0 * 5e-3) << "delta_l " << l;
    EXPECT_NEAR(a, l, 5e-3 * l);
  }
}

TEST(PathLength, RejectsBadGrids) {
  auto t = fringe_trace(quiet_config(2.78), EmitterParams{}, linspace(0.0, 30.0, 3001), false);
  t.freq[100] += 1e-3;
  EXPECT_THROW(estimate_path_length_fft(t), InputError);
  // Half a gigahertz holds fewer than eight periods at 2.78 m.
  const auto short_sweep = fringe_trace(quiet_config(2.78), EmitterParams{}, linspace(0.0, 0.5, 501), false);
  EXPECT_THROW(estimate_path_length_fft(short_sweep), InputError);
}
