#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <numbers>
#include <random>

#include "evtrack/emsif.hpp"
#include "evtrack/error.hpp"
#include "evtrack/scene.hpp"

using namespace evtrack;

namespace {

FilterState make_state(const Eigen::VectorXd& s, const Eigen::MatrixXd& P) {
  FilterState st;
  st.s = s;
  st.P = P;
  return st;
}

double max_relative(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
  return worst;
}

}  // namespace

TEST_CASE("h_measure and h_jacobian: canonical values") {
  const FilterModel dp = FilterModel::disk_polar();
  CHECK(h_measure(dp, Eigen::Vector3d(0, 0.3, 50)).isApprox(Vec2(114, 64)));
  CHECK(h_measure(dp, Eigen::Vector3d(std::numbers::pi / 2, 0, 50)).isApprox(Vec2(64, 114)));
  const FilterModel cv = FilterModel::constant_velocity();
  CHECK(h_measure(cv, Eigen::Vector4d(10, 20, 3, 4)) == Vec2(10, 20));
  Eigen::MatrixXd expect(2, 3);
  expect << 0, 0, 1, 50, 0, 0;
  CHECK(h_jacobian(dp, Eigen::Vector3d(0, 0, 50)).isApprox(expect));
  Eigen::MatrixXd hcv(2, 4);
  hcv << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK(h_jacobian(cv, Eigen::Vector4d(1, 2, 3, 4)) == hcv);
}

TEST_CASE("h_jacobian matches central finite differences at 100 random states") {
  const FilterModel dp = FilterModel::disk_polar();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> th(-std::numbers::pi, std::numbers::pi), om(-0.2, 0.2),
      r(5, 60);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const Eigen::Vector3d s(th(rng), om(rng), r(rng));
    const Eigen::MatrixXd H = h_jacobian(dp, s);
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(H).rank() == 2);
    Eigen::MatrixXd fd(2, 3);
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d a = s, b = s;
      a(j) += h;
      b(j) -= h;
      fd.col(j) = (h_measure(dp, a) - h_measure(dp, b)) / (2 * h);
    }
    CHECK(max_relative(H, fd) <= 1e-6);
  }
}

TEST_CASE("pseudo-inverse: canonical case and the four Penrose conditions") {
  Eigen::MatrixXd h(2, 3);
  h << 1, 0, 0, 0, 1, 0;
  Eigen::MatrixXd expect(3, 2);
  expect << 1, 0, 0, 1, 0, 0;
  CHECK(pseudo_inverse(h).matrix.isApprox(expect));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int n = 0; n < 100; ++n) {
    Eigen::MatrixXd a(2, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = g(rng);
    const PseudoInverse p = pseudo_inverse(a);
    REQUIRE_FALSE(p.ill_conditioned);
    const Eigen::MatrixXd& x = p.matrix;
    CHECK((a * x * a - a).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((x * a * x - x).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(((a * x).transpose() - a * x).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(((x * a).transpose() - x * a).cwiseAbs().maxCoeff() <= 1e-9);
  }
  Eigen::MatrixXd rank1(2, 3);
  rank1 << 1, 2, 3, 2, 4, 6;
  const PseudoInverse r = pseudo_inverse(rank1);
  CHECK(r.ill_conditioned);
  CHECK(r.matrix.allFinite());
}

TEST_CASE("predict: transition, zero noise, PSD preservation") {
  FilterModel dp = FilterModel::disk_polar();
  const FilterState st = predict(dp, make_state(Eigen::Vector3d(0, 0.05, 50), Eigen::Matrix3d::Zero()));
  CHECK(st.s.isApprox(Eigen::Vector3d(0.05, 0.05, 50)));
  dp.Q.setZero();
  CHECK(predict(dp, make_state(Eigen::Vector3d(1, 0.1, 20), Eigen::Matrix3d::Zero())).P.isZero());
  // Wraps theta.
  CHECK(predict(dp, make_state(Eigen::Vector3d(3.1, 0.1, 20), Eigen::Matrix3d::Zero())).s(0) ==
        doctest::Approx(3.2 - 2 * std::numbers::pi));
  const FilterModel def = FilterModel::disk_polar();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a(i) = g(rng);
    const FilterState p = predict(def, make_state(Eigen::Vector3d(0.2, 0.05, 30), a * a.transpose()));
    CHECK((p.P - p.P.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.P).eigenvalues().minCoeff() >= -1e-9);
  }
  const FilterModel cv = FilterModel::constant_velocity();
  CHECK(predict(cv, make_state(Eigen::Vector4d(1, 2, 0.5, -1), Eigen::Matrix4d::Zero())).s.isApprox(
      Eigen::Vector4d(1.5, 1, 0.5, -1)));
}

TEST_CASE("update: saturation range, zero innovation, full saturation for both gain forms") {
  for (GainForm gain : {GainForm::kPropagated, GainForm::kPseudoInverse}) {
    FilterModel dp = FilterModel::disk_polar();
    dp.gain = gain;
    const FilterState prior =
        make_state(Eigen::Vector3d(0.4, 0.03, 35), Eigen::Vector3d(0.1, 0.01, 25).asDiagonal());
    // z = h(s) -> unchanged.
    const FilterState same = update(dp, prior, h_measure(dp, prior.s));
    CHECK((same.s - prior.s).cwiseAbs().maxCoeff() == 0.0);
    CHECK(same.saturation.isZero());
    // |z~| >= delta on both channels -> H (s+ - s-) = z~.
    const Vec2 z = h_measure(dp, prior.s) + Vec2(12.0, -15.0);
    const FilterState post = update(dp, prior, z);
    CHECK(post.saturation == Vec2(1, 1));
    const Eigen::MatrixXd H = h_jacobian(dp, prior.s);
    CHECK((H * (post.s - prior.s) - post.innovation).norm() <= 1e-9);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int n = 0; n < 200; ++n) {
      const FilterState q = update(dp, prior, h_measure(dp, prior.s) + Vec2(u(rng), u(rng)));
      CHECK(q.saturation.minCoeff() >= 0.0);
      CHECK(q.saturation.maxCoeff() <= 1.0);
      CHECK((q.P - q.P.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q.P).eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("pseudo-inverse gain form: K = H+ when saturated, half gain at half delta") {
  FilterModel dp = FilterModel::disk_polar();
  dp.gain = GainForm::kPseudoInverse;
  const Eigen::Vector3d s(0.9, 0.05, 40);
  const Correction full = compute_correction(dp, s, h_measure(dp, s) + Vec2(30, 30));
  const Eigen::MatrixXd H = h_jacobian(dp, s);
  // Hand-rolled right pseudo-inverse.
  const Eigen::MatrixXd hp = H.transpose() * (H * H.transpose()).inverse();
  CHECK((full.K - hp).cwiseAbs().maxCoeff() <= 1e-12);
  const Vec2 half_innov = dp.delta / 2;
  const Correction half = compute_correction(dp, s, h_measure(dp, s) + half_innov);
  CHECK(half.saturation.isApprox(Vec2(0.5, 0.5)));
  CHECK((half.ds - 0.5 * hp * half_innov).cwiseAbs().maxCoeff() <= 1e-12);
  // The textbook form never corrects omega: its column of H is zero.
  CHECK(std::abs(full.ds(1)) <= 1e-15);
}

TEST_CASE("propagated gain corrects omega through theta") {
  const FilterModel dp = FilterModel::disk_polar();
  const Eigen::Vector3d s(0.9, 0.0, 40);
  const Correction c = compute_correction(dp, s, h_measure(dp, Eigen::Vector3d(0.95, 0, 40)));
  CHECK(c.ds(1) > 0.0);
  const Eigen::MatrixXd k_oracle =
      dp.F * (h_jacobian(dp, s) * dp.F).transpose() *
      ((h_jacobian(dp, s) * dp.F) * (h_jacobian(dp, s) * dp.F).transpose()).inverse() *
      c.saturation.asDiagonal();
  CHECK((c.K - k_oracle).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("degenerate radius is clamped and flagged") {
  FilterModel dp = FilterModel::disk_polar();
  dp.gain = GainForm::kPseudoInverse;
  const FilterState prior = make_state(Eigen::Vector3d(0, 0, 3), Eigen::Matrix3d::Identity());
  const FilterState post = update(dp, prior, dp.center + Vec2(-12, 0));
  CHECK(post.degenerate);
  CHECK(post.s(2) == dp.r_min);
  CHECK_FALSE(update(dp, prior, dp.center + Vec2(3.5, 0)).degenerate);
}

TEST_CASE("init_from_detection") {
  const FilterModel dp = FilterModel::disk_polar();
  const FilterState st = init_from_detection(dp, Vec2(64, 114), 4);
  CHECK(st.s(0) == doctest::Approx(std::numbers::pi / 2));
  CHECK(st.s(1) == 0.0);
  CHECK(st.s(2) == doctest::Approx(50));
  CHECK(st.frame == 4);
  CHECK(st.P.diagonal().isApprox(dp.p0));
  CHECK_THROWS_AS(init_from_detection(dp, Vec2(64.3, 64.2)), ConfigError);
  const FilterState cv = init_from_detection(FilterModel::constant_velocity(), Vec2(3, 4));
  CHECK(cv.s == Eigen::Vector4d(3, 4, 0, 0));
}

TEST_CASE("model validation") {
  FilterModel m = FilterModel::disk_polar();
  CHECK_NOTHROW(m.validate());
  m.delta(0) = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = FilterModel::disk_polar();
  m.R(0, 0) = -1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = FilterModel::disk_polar();
  m.Q(0, 0) = -1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = FilterModel::disk_polar();
  m.F = Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("noiseless default scene: omega converges below 0.005 within 100 frames and stays") {
  const DiskScene scene = validate_scene(default_scene());
  const auto truth = ground_truth(scene);
  const FilterModel dp = FilterModel::disk_polar(scene.center);
  for (std::size_t i = 0; i < 3; ++i) {
    FilterState st = init_from_detection(dp, truth[0][i].position);
    int settled = -1;
    for (int k = 1; k < scene.frame_count; ++k) {
      st = update(dp, predict(dp, st), truth[k][i].position);
      const bool ok = std::abs(st.s(1) - 0.05) < 0.005;
      if (ok && settled < 0) settled = k;
      if (!ok) settled = -1;
    }
    CAPTURE(i);
    CHECK(settled >= 0);
    CHECK(settled <= 100);
  }
}
