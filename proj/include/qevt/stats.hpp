#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qevt {

enum class TestMethod { HotellingT2, ShapiroWilkUnivariate, ShapiroWilkMultivariate };

std::string_view to_string(TestMethod method);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::HotellingT2;
};

// Rows of `samples` are observations. H0: E[x] = mu0.
//   T^2 = m (xbar - mu0)^T S^-1 (xbar - mu0),  S unbiased
//   T^2 (m - d) / (d (m - 1)) ~ F(d, m - d)
// Throws InsufficientSamples when m <= d and SingularCovariance when S is
// not invertible (no pseudo-inverse).
TestResult hotelling_t2(const Eigen::MatrixXd& samples, const Eigen::VectorXd& mu0);

// Royston's (1992/1995) W statistic and p-value, 3 <= n <= 5000.
TestResult shapiro_wilk_univariate(std::span<const double> xs);

struct MultivariateSwOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0x5eed5eedULL;
};

// Villasenor-Alva & Gonzalez-Estrada statistic: mean univariate W of the
// coordinates of S^(-1/2) (x_i - xbar). The p-value is the fraction of
// `replicates` standard-normal datasets of the same shape whose statistic is
// at most the observed one. Null distributions are cached per
// (m, d, replicates, seed).
TestResult shapiro_wilk_multivariate(const Eigen::MatrixXd& samples, const MultivariateSwOptions& options = {});

// Statistic alone, without calibration.
double shapiro_wilk_multivariate_statistic(const Eigen::MatrixXd& samples);

struct RegressionLine {
  double slope = 0.0;
  double intercept = 0.0;
  double at(double x) const noexcept { return slope * x + intercept; }
};

RegressionLine fit_regression_line(std::span<const double> xs, std::span<const double> ys);

struct Crossing {
  std::size_t n = 0;
  bool never_crossed = false;
};

// Smallest n in [n_min, n_max] where a rising line reaches `level`. A rising
// line already at or above the level at n_min gives n_min. A flat or falling
// line, or one that only gets there past n_max, gives n_max with
// never_crossed set.
Crossing crossing_sample_size(const RegressionLine& line, double level, std::size_t n_min, std::size_t n_max);

}  // namespace qevt
