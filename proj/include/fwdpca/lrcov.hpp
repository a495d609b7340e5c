#pragma once

#include <optional>
#include <string_view>

#include "fwdpca/curves.hpp"

namespace fwdpca {

enum class Estimator { static_cov, andrews_qs, vk_bartlett, mueller_ua };

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view text);

/// How the UA(p) estimate is formed from the cosine regression.
enum class UaVariant {
    /// average of outer products of the p cosine-projection coefficients
    projection,
    /// p^-1 * (sum of regression residuals)(sum of regression residuals)^T.
    /// The residuals of a demeaned series on a zero-sum cosine basis sum to
    /// zero, so this is identically zero; kept for comparison only.
    literal_residual,
};

std::string_view to_string(UaVariant v);
UaVariant ua_variant_from_string(std::string_view text);

struct CovarianceEstimate {
    Matrix matrix;
    Estimator estimator = Estimator::static_cov;
    /// Andrews: plug-in or override bandwidth. VK: T.
    std::optional<double> bandwidth;
    /// UA(p) only.
    std::optional<int> p;
    Eigen::Index T = 0;
    /// Total magnitude of the negative eigenvalues removed by PSD cleanup.
    double clipped = 0.0;
};

struct EstimatorSpec {
    Estimator kind = Estimator::static_cov;
    int p = 4;
    std::optional<double> bandwidth;
    UaVariant ua_variant = UaVariant::projection;
};

/// Rows minus the column means.
Matrix demean(const Matrix& w);

/// gamma(j) = T^-1 sum_{t>j} (w_t - mean)(w_{t-j} - mean)^T, divisor T at every lag.
Matrix autocovariance(const Matrix& w, Eigen::Index j);

CovarianceEstimate static_cov(const Matrix& w);

/// Quadratic-spectral kernel, K(0) = 1.
double qs_kernel(double x);

/// AR(1) plug-in bandwidth 1.3221 (alpha(2) T)^(1/5); rho capped at 0.97,
/// columns with variance below 1e-14 skipped. Returns 0 when every column
/// is skipped.
double andrews_bandwidth(const Matrix& w);

/// sum_j k_j gamma(j) over |j| < T with lag weights k_j = weight(j), as
/// T^-1 U^T W U for the demeaned U and Toeplitz W. Symmetrized, not clipped.
Matrix kernel_weighted_sum(const Matrix& w, const Eigen::VectorXd& lag_weights);

CovarianceEstimate andrews_lrcm(const Matrix& w, std::optional<double> bandwidth = std::nullopt);

/// Bartlett kernel with bandwidth T, via 2 T^-2 sum_t S_t S_t^T on demeaned partial sums.
CovarianceEstimate vk_lrcm(const Matrix& w);

CovarianceEstimate mueller_ua(const Matrix& w, int p, UaVariant variant = UaVariant::projection);

/// sqrt(2/T) cos(l pi (t - 1/2) / T), t = 1..T, l = 1..p as a T x p matrix.
Matrix cosine_basis(Eigen::Index T, int p);

CovarianceEstimate estimate(const Matrix& w, const EstimatorSpec& spec);

}  // namespace fwdpca
