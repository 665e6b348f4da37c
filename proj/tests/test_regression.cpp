#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "thermid/json_io.hpp"
#include "thermid/regression.hpp"

using namespace thermid;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TimeSeriesDataset random_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  TimeSeriesDataset d;
  d.t_s = 1.0 / 12;
  d.u1.resize(n);
  d.u2.resize(n);
  d.u3.resize(n);
  d.y.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    d.u1[k] = u(rng);
    d.u2[k] = 20.0 + u(rng);
    d.u3[k] = std::abs(u(rng));
    d.y[k] = 24.0 + u(rng);
  }
  return d;
}

// Synthesizes outputs that satisfy the difference equation exactly for a
// given coefficient vector and transformed disturbance.
TimeSeriesDataset self_consistent_dataset(const PlantParams& p,
                                          const std::vector<double>& wbar,
                                          std::uint64_t seed) {
  const std::size_t n = wbar.size() + 2;
  TimeSeriesDataset d = random_dataset(n, seed);
  d.y[0] = 24.0;
  d.y[1] = 24.3;
  const auto& t = p.theta;
  for (std::size_t k = 2; k < n; ++k)
    d.y[k] = t(0) * d.y[k - 1] + t(1) * d.y[k - 2] + t(2) * d.u1[k - 2] +
             t(3) * d.u1[k - 1] + t(4) * d.u1[k] + t(5) * d.u2[k - 2] +
             t(6) * d.u2[k - 1] + t(7) * d.u2[k] + t(8) * d.u3[k - 2] +
             t(9) * d.u3[k - 1] + t(10) * d.u3[k] + wbar[k - 2];
  return d;
}

PlantParams stable_params() {
  return tustin_plant_params(kReferenceParams, kDefaultSamplingHours);
}

}  // namespace

TEST_CASE("build_regression") {
  SECTION("smallest admissible record gives a single row") {
    TimeSeriesDataset d;
    d.u1 = {1, 2, 3};
    d.u2 = {4, 5, 6};
    d.u3 = {7, 8, 9};
    d.y = {10, 11, 12};
    const auto prob = build_regression(d);
    REQUIRE(prob.rows() == 1);
    REQUIRE(prob.cols() == 12);
    const MatrixXd Phi = dense_phi(prob);
    REQUIRE(Phi.rows() == 1);
    REQUIRE(Phi.cols() == 12);
    REQUIRE(Phi(0, 11) == 1.0);
    // row layout: y lags then the three input stencils oldest-first
    REQUIRE(Phi(0, 0) == 11.0);
    REQUIRE(Phi(0, 1) == 10.0);
    REQUIRE(Phi(0, 2) == 1.0);
    REQUIRE(Phi(0, 4) == 3.0);
    REQUIRE(Phi(0, 5) == 4.0);
    REQUIRE(Phi(0, 10) == 9.0);
    REQUIRE(prob.y(0) == 12.0);
  }

  SECTION("rejects records shorter than 3") {
    TimeSeriesDataset d;
    d.u1 = {1, 2};
    d.u2 = {1, 2};
    d.u3 = {1, 2};
    d.y = {1, 2};
    REQUIRE_THROWS_AS(build_regression(d), std::invalid_argument);
  }

  SECTION("self-consistent data has zero residual at the true theta") {
    const PlantParams p = stable_params();
    std::vector<double> wbar(200);
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto& v : wbar) v = u(rng);
    const auto d = self_consistent_dataset(p, wbar, 62);
    const auto prob = build_regression(d);
    ThetaFull full;
    full.theta_p = p;
    full.w_bar = Eigen::Map<const VectorXd>(wbar.data(),
                                            static_cast<Eigen::Index>(wbar.size()));
    const VectorXd resid = apply_phi(prob, full.stacked()) - prob.y;
    REQUIRE(resid.cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("all-zero record gives zero data columns and identity block") {
    TimeSeriesDataset d;
    d.u1.assign(6, 0.0);
    d.u2.assign(6, 0.0);
    d.u3.assign(6, 0.0);
    d.y.assign(6, 0.0);
    const auto prob = build_regression(d);
    REQUIRE(prob.y.isZero(0.0));
    REQUIRE(prob.data_cols.isZero(0.0));
    const MatrixXd Phi = dense_phi(prob);
    REQUIRE(Phi.rightCols(4).isApprox(MatrixXd::Identity(4, 4)));
  }

  SECTION("rank deficiency and the identity block") {
    const auto d = random_dataset(40, 63);
    const auto prob = build_regression(d);
    const MatrixXd Phi = dense_phi(prob);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Phi);
    REQUIRE(qr.rank() == prob.rows());  // full row rank, never column rank
    REQUIRE(prob.cols() == prob.rows() + 11);

    // perturbing one disturbance coordinate changes exactly one row
    ThetaFull full = split_theta(VectorXd::Random(prob.cols()).eval());
    const VectorXd base = apply_phi(prob, full.stacked());
    full.w_bar(7) += 0.5;
    const VectorXd bumped = apply_phi(prob, full.stacked());
    VectorXd diff = bumped - base;
    REQUIRE(diff(7) == Catch::Approx(0.5));
    diff(7) = 0.0;
    REQUIRE(diff.isZero(0.0));
  }

  SECTION("structured products agree with the dense matrix") {
    const auto d = random_dataset(30, 64);
    const auto prob = build_regression(d);
    const MatrixXd Phi = dense_phi(prob);
    const VectorXd t = VectorXd::Random(prob.cols());
    const VectorXd v = VectorXd::Random(prob.rows());
    REQUIRE((apply_phi(prob, t) - Phi * t).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((apply_phi_transpose(prob, v) - Phi.transpose() * v)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }

  SECTION("dense materialization refuses huge records") {
    const auto d = random_dataset(40, 65);
    auto prob = build_regression(d);
    prob.k_max = kDensePhiLimit + 1;
    REQUIRE_THROWS_AS(dense_phi(prob), std::length_error);
  }
}

TEST_CASE("selector_matrix") {
  SECTION("extracts the disturbance block") {
    const auto S = selector_matrix(20);
    VectorXd t = VectorXd::Random(29);
    REQUIRE(S.apply(t) == t.tail(18));
  }

  SECTION("dense form has orthonormal rows and the right shape") {
    const auto S = selector_matrix(5);
    const MatrixXd Sd = S.dense();
    REQUIRE(Sd.rows() == 3);
    REQUIRE(Sd.cols() == 14);
    REQUIRE((Sd * Sd.transpose()).isApprox(MatrixXd::Identity(3, 3)));
    for (Eigen::Index r = 0; r < Sd.rows(); ++r)
      REQUIRE(Sd.row(r).sum() == 1.0);
  }

  SECTION("k_max below 3 is rejected") {
    REQUIRE_THROWS_AS(selector_matrix(2), std::invalid_argument);
  }
}

TEST_CASE("predict") {
  SECTION("zero model with zero disturbance predicts zero") {
    auto d = random_dataset(20, 66);
    PlantParams p;
    p.theta.setZero();
    std::vector<double> wbar(18, 0.0);
    const auto yhat = predict(p, wbar, d);
    REQUIRE(yhat[0] == d.y[0]);
    REQUIRE(yhat[1] == d.y[1]);
    for (std::size_t k = 2; k < 20; ++k) REQUIRE(yhat[k] == 0.0);
  }

  SECTION("free run reproduces self-consistent data exactly") {
    const PlantParams p = stable_params();
    std::vector<double> wbar(500);
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto& v : wbar) v = u(rng);
    const auto d = self_consistent_dataset(p, wbar, 68);
    const auto yhat = predict(p, wbar, d);
    for (std::size_t k = 0; k < d.size(); ++k)
      REQUIRE(yhat[k] == Catch::Approx(d.y[k]).margin(1e-8));
    const auto yhat1 = predict(p, wbar, d, true);
    for (std::size_t k = 0; k < d.size(); ++k)
      REQUIRE(yhat1[k] == Catch::Approx(d.y[k]).margin(1e-8));
  }

  SECTION("length mismatch is rejected") {
    auto d = random_dataset(20, 69);
    PlantParams p;
    p.theta.setZero();
    std::vector<double> wbar(17, 0.0);
    REQUIRE_THROWS_AS(predict(p, wbar, d), std::invalid_argument);
  }
}

TEST_CASE("ThetaFull stacking and JSON") {
  ThetaFull t;
  t.theta_p = stable_params();
  t.w_bar = VectorXd::LinSpaced(5, -1.0, 1.0);
  const VectorXd s = t.stacked();
  REQUIRE(s.size() == 16);
  REQUIRE(s.head<11>() == t.theta_p.theta);
  REQUIRE(s.tail(5) == t.w_bar);

  const ThetaFull back = split_theta(s);
  REQUIRE(back.theta_p.theta == t.theta_p.theta);
  REQUIRE(back.w_bar == t.w_bar);

  nlohmann::json j = t;
  REQUIRE(j.at("theta_p").size() == 11);
  REQUIRE(j.at("w_bar").size() == 5);
  const auto rt = j.get<ThetaFull>();
  REQUIRE(rt.theta_p.theta == t.theta_p.theta);
  REQUIRE(rt.w_bar == t.w_bar);
}
