#pragma once

#include <cstddef>
#include <optional>

#include "fwdpca/curves.hpp"
#include "fwdpca/lrcov.hpp"

namespace fwdpca {

struct PcaDecomposition {
    /// Descending; ties keep the solver's original index order.
    Vector eigenvalues;
    /// Column k is the loading for eigenvalues[k], largest-magnitude entry positive.
    Matrix loadings;
    /// Empty when the trace is not positive (see degenerate).
    Vector cum_r2;
    bool degenerate = false;
    std::optional<Estimator> estimator;
    Eigen::Index T = 0;
};

/// Throws DataError when the input is asymmetric beyond 1e-10 relative to its
/// largest entry.
PcaDecomposition eigen_decompose(const Matrix& symmetric);
PcaDecomposition eigen_decompose(const CovarianceEstimate& cov);

/// c_k = sum_{i<=k} lambda_i / sum_i lambda_i with negative eigenvalues taken
/// as zero; the last entry is exactly 1. Throws NumericalError on zero trace.
Vector cumulative_r2(const Vector& eigenvalues);
Vector cumulative_r2(const PcaDecomposition& decomp);

/// Smallest k (1-based) with c_k >= threshold.
std::size_t count_factors(const Vector& cum_r2, double threshold = 0.99);

struct VolLoadings {
    MaturityGrid grid;
    /// n x m, column i = sigma_i at the grid maturities (annualized).
    Matrix sigmas;

    std::size_t m() const { return static_cast<std::size_t>(sigmas.cols()); }
    void validate() const;
};

/// sigma_i = phi_i sqrt(lambda_i) / sqrt(dt) for i < m.
VolLoadings extract_volatility(const PcaDecomposition& decomp, const MaturityGrid& grid, double dt, std::size_t m);

/// sum_i int_0^T0 (int_{T0-s}^{T-s} sigma_i(x) dx)^2 ds with sigma_i linear
/// between grid points and flat outside. The inner integral is exact; the
/// outer uses composite Simpson on `outer_intervals` (even, >= 200) pieces.
double pca_integrated_variance(const VolLoadings& vol, double expiry, double maturity,
                               int outer_intervals = 400);

}  // namespace fwdpca
