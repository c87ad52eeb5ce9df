#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "ductwave/errors.hpp"
#include "ductwave/metrics.hpp"
#include "ductwave/rng.hpp"

using namespace ductwave;

namespace {

// Values frozen from scikit-image 0.25.2 structural_similarity(gaussian_weights=True,
// sigma=1.5, use_sample_covariance=False, data_range=1) on the float32 fixtures below.
constexpr double kSsim16x16 = -0.15714605716235713;
constexpr double kSsim32x24 = -0.010312355675876683;

std::pair<Raster, Raster> fixture(std::size_t rows, std::size_t cols) {
  Raster a(rows, cols);
  Raster b(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double R = static_cast<double>(r);
      const double C = static_cast<double>(c);
      a(r, c) = static_cast<float>(0.5 + 0.4 * std::sin(0.9 * R + 0.35 * C));
      b(r, c) = static_cast<float>(0.5 + 0.3 * std::cos(0.4 * R - 0.6 * C) + 0.1 * std::sin(R * C / 10.0));
    }
  }
  return {a, b};
}

Raster random_image(DeterministicRng& rng, std::size_t n = 64) {
  Raster r(n, n);
  const double base = rng.uniform();
  for (auto& v : r.values()) v = static_cast<float>(std::clamp(base + 0.3 * (rng.uniform() - 0.5), 0.0, 1.0));
  return r;
}

GaussianStats stats_from(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  GaussianStats s;
  s.dim = static_cast<std::size_t>(mean.size());
  s.count = 100;
  s.mean.assign(mean.data(), mean.data() + mean.size());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) s.covariance.push_back(cov(i, j));
  }
  return s;
}

double reference_frechet(const Eigen::VectorXd& ma, const Eigen::MatrixXd& sa, const Eigen::VectorXd& mb,
                         const Eigen::MatrixXd& sb) {
  // Tr sqrt(A B) from the eigenvalues of the non-symmetric product.
  Eigen::EigenSolver<Eigen::MatrixXd> es(sa * sb);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr;
}

}  // namespace

TEST_CASE("mse") {
  CHECK(mse(Raster(4, 4, 0.3F), Raster(4, 4, 0.3F)) == 0.0);
  CHECK(mse(Raster(4, 4, 0.0F), Raster(4, 4, 1.0F)) == 1.0);
  DeterministicRng rng(1);
  const auto a = random_image(rng, 32);
  const auto b = random_image(rng, 32);
  double naive = 0.0;
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      const double d = static_cast<double>(a(r, c)) - b(r, c);
      naive += d * d;
    }
  }
  CHECK(mse(a, b) == doctest::Approx(naive / 1024.0).epsilon(1e-14));
  CHECK_THROWS_AS(mse(Raster(4, 4), Raster(4, 5)), InvalidInputError);
}

TEST_CASE("ssim fixtures") {
  const auto [a, b] = fixture(16, 16);
  CHECK(std::abs(ssim(a, b) - kSsim16x16) < 1e-6);
  const auto [c, d] = fixture(32, 24);
  CHECK(std::abs(ssim(c, d) - kSsim32x24) < 1e-6);
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(Raster(20, 20, 0.4F), Raster(20, 20, 0.4F)) == 1.0);
  CHECK(ssim(a, b) == ssim(b, a));
  CHECK_THROWS_AS(ssim(Raster(10, 10), Raster(10, 10)), InvalidInputError);
  CHECK_THROWS_AS(ssim(a, Raster(16, 17)), InvalidInputError);
}

TEST_CASE("frechet closed form") {
  const Eigen::Index dim = 6;
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m1 = m0;
  m1(1) = 1.0;
  m1(4) = 1.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  CHECK(frechet_distance(stats_from(m0, eye), stats_from(m1, eye)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(frechet_distance(stats_from(m0, eye), stats_from(m0, eye)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("frechet matches a general eigen-solver reference") {
  DeterministicRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index dim = 8;
    Eigen::MatrixXd xa(dim, dim), xb(dim, dim);
    Eigen::VectorXd ma(dim), mb(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      ma(i) = rng.uniform(-1, 1);
      mb(i) = rng.uniform(-1, 1);
      for (Eigen::Index j = 0; j < dim; ++j) {
        xa(i, j) = rng.uniform(-1, 1);
        xb(i, j) = rng.uniform(-1, 1);
      }
    }
    const Eigen::MatrixXd sa = xa * xa.transpose();
    const Eigen::MatrixXd sb = xb * xb.transpose();
    const double got = frechet_distance(stats_from(ma, sa), stats_from(mb, sb));
    CHECK(got == doctest::Approx(reference_frechet(ma, sa, mb, sb)).epsilon(1e-9));
  }
}

TEST_CASE("frechet rejects indefinite covariance") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(2, 2) = -0.5;
  const Eigen::VectorXd m = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(frechet_distance(stats_from(m, bad), stats_from(m, Eigen::MatrixXd::Identity(3, 3))), NumericalError);
}

TEST_CASE("feature bank determinism") {
  const FeatureBank a(11);
  const FeatureBank b(11);
  const FeatureBank c(12);
  CHECK(a.feature_dim() == 32);
  DeterministicRng rng(8);
  const auto img = random_image(rng);
  const auto other = random_image(rng);
  CHECK(a.patch_features(img) == b.patch_features(img));
  CHECK(a.patch_features(img) != c.patch_features(img));
  CHECK(a.patch_features(img).size() == 7 * 7 * a.feature_dim());
  const double d1 = frechet_feature_distance(img, other, a);
  const double d2 = frechet_feature_distance(img, other, b);
  CHECK(d1 == d2);
  CHECK(d1 > 0.0);
}

TEST_CASE("metric axioms on random pairs") {
  DeterministicRng rng(21);
  const FeatureBank bank;
  for (int i = 0; i < 100; ++i) {
    const auto a = random_image(rng, 48);
    const auto b = random_image(rng, 48);
    REQUIRE(mse(a, a) == 0.0);
    REQUIRE(mse(a, b) == mse(b, a));
    REQUIRE(mse(a, b) > 0.0);
    REQUIRE(ssim(a, a) == 1.0);
    REQUIRE(ssim(a, b) == ssim(b, a));
    REQUIRE(std::abs(ssim(a, b)) <= 1.0);
    REQUIRE(frechet_feature_distance(a, a, bank) <= 1e-6);
    REQUIRE(frechet_feature_distance(a, b, bank) == frechet_feature_distance(b, a, bank));
    REQUIRE(frechet_feature_distance(a, b, bank) >= 0.0);
  }
}

TEST_CASE("set-level frechet") {
  DeterministicRng rng(4);
  std::vector<Raster> a, b;
  for (int i = 0; i < 3; ++i) {
    a.push_back(random_image(rng));
    b.push_back(random_image(rng));
  }
  const FeatureBank bank;
  CHECK(frechet_set_distance(a, a, bank) <= 1e-6);
  CHECK(frechet_set_distance(a, b, bank) > 0.0);
  CHECK_THROWS_AS(frechet_set_distance({}, b, bank), InvalidInputError);
}

TEST_CASE("welch t-test") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 3, 4, 5, 6};
  // scipy.stats.ttest_ind(equal_var=False) 1.15.3
  const auto r = welch_t_test(x, y);
  CHECK(r.t_statistic == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(r.p_value - 0.34659350708733416) < 1e-6);
  CHECK(r.degrees_of_freedom == doctest::Approx(8.0).epsilon(1e-12));

  const std::vector<double> u{0.2, 0.9, 1.4, 2.2, 2.9, 3.1};
  const std::vector<double> v{1.0, 1.1, 1.3, 1.2};
  const auto s = welch_t_test(u, v);
  CHECK(std::abs(s.t_statistic - 1.3388251678948517) < 1e-9);
  CHECK(std::abs(s.p_value - 0.23629244860289988) < 1e-6);
  CHECK(std::abs(s.degrees_of_freedom - 5.188416371272095) < 1e-9);

  const auto swapped = welch_t_test(v, u);
  CHECK(swapped.t_statistic == -s.t_statistic);
  CHECK(swapped.p_value == s.p_value);

  const auto same = welch_t_test(x, x);
  CHECK(same.t_statistic == 0.0);
  CHECK(same.p_value == 1.0);

  const std::vector<double> c1{2, 2, 2};
  const auto deg = welch_t_test(c1, c1);
  CHECK(deg.degenerate);
  CHECK(deg.p_value == 1.0);
  const std::vector<double> c2{3, 3, 3};
  CHECK(welch_t_test(c1, c2).p_value == 0.0);

  CHECK_THROWS_AS(welch_t_test(std::vector<double>{1.0}, y), InvalidInputError);
  CHECK_THROWS_AS(welch_t_test(std::vector<double>{}, y), InvalidInputError);
}

TEST_CASE("welch separates distant populations") {
  DeterministicRng rng(6);
  std::vector<double> a, b;
  for (int i = 0; i < 200; ++i) {
    // Sum of uniforms, sd about 0.1.
    double s = 0.0, t = 0.0;
    for (int k = 0; k < 12; ++k) {
      s += rng.uniform();
      t += rng.uniform();
    }
    a.push_back(0.1 * (s - 6.0));
    b.push_back(1.0 + 0.1 * (t - 6.0));
  }
  CHECK(welch_t_test(a, b).p_value < 1e-6);
}
