#include "fwdpca/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fwdpca/errors.hpp"
#include "fwdpca/linalg.hpp"

namespace fwdpca {

PcaDecomposition eigen_decompose(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0) {
        throw DataError("eigen_decompose: expected a nonempty square matrix");
    }
    if (!symmetric.allFinite()) throw DataError("eigen_decompose: matrix contains non-finite values");
    const double scale = symmetric.cwiseAbs().maxCoeff();
    if (max_asymmetry(symmetric) > 1e-10 * std::max(scale, 1e-300)) {
        throw DataError("eigen_decompose: matrix is not symmetric");
    }
    const SymmetricEigen eig = jacobi_eigen(symmetrize(symmetric));
    const Eigen::Index n = symmetric.rows();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return eig.values[a] > eig.values[b]; });

    PcaDecomposition out;
    out.eigenvalues.resize(n);
    out.loadings.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues[k] = eig.values[src];
        Vector v = eig.vectors.col(src);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < n; ++i) {
            // first index wins among equal magnitudes
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        }
        if (v[arg] < 0.0) v = -v;
        out.loadings.col(k) = v;
    }
    const double trace = out.eigenvalues.cwiseMax(0.0).sum();
    if (trace > 0.0) {
        out.cum_r2 = cumulative_r2(out.eigenvalues);
    } else {
        out.degenerate = true;
    }
    return out;
}

PcaDecomposition eigen_decompose(const CovarianceEstimate& cov) {
    PcaDecomposition out = eigen_decompose(cov.matrix);
    out.estimator = cov.estimator;
    out.T = cov.T;
    return out;
}

Vector cumulative_r2(const Vector& eigenvalues) {
    const Vector clipped = eigenvalues.cwiseMax(0.0);
    const double total = clipped.sum();
    if (!(total > 0.0)) throw NumericalError("cumulative_r2: spectrum has zero trace");
    Vector c(eigenvalues.size());
    double run = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        run += clipped[k];
        c[k] = std::min(run / total, 1.0);
    }
    c[c.size() - 1] = 1.0;
    return c;
}

Vector cumulative_r2(const PcaDecomposition& decomp) { return cumulative_r2(decomp.eigenvalues); }

std::size_t count_factors(const Vector& cum_r2, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("count_factors: threshold must lie in (0, 1]");
    for (Eigen::Index k = 0; k < cum_r2.size(); ++k) {
        if (cum_r2[k] >= threshold - 1e-12) return static_cast<std::size_t>(k + 1);
    }
    return static_cast<std::size_t>(cum_r2.size());
}

void VolLoadings::validate() const {
    if (sigmas.cols() < 1) throw DataError("volatility loadings are empty");
    if (static_cast<std::size_t>(sigmas.rows()) != grid.size()) {
        throw DataError("volatility loadings do not match the maturity grid");
    }
    if (!sigmas.allFinite()) throw NumericalError("volatility loadings contain non-finite values");
}

VolLoadings extract_volatility(const PcaDecomposition& decomp, const MaturityGrid& grid, double dt, std::size_t m) {
    const auto n = static_cast<std::size_t>(decomp.eigenvalues.size());
    if (grid.size() != n) throw DataError("extract_volatility: grid size differs from the decomposition");
    if (m < 1 || m > n) throw UsageError("extract_volatility: need 1 <= m <= " + std::to_string(n));
    if (!(dt > 0.0)) throw UsageError("extract_volatility: dt must be positive");
    const double top = std::max(decomp.eigenvalues[0], 0.0);
    Matrix sigmas(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
        double lambda = decomp.eigenvalues[i];
        if (lambda < 0.0) {
            if (lambda < -1e-12 * top) {
                throw NumericalError("extract_volatility: eigenvalue " + std::to_string(i + 1) + " is negative");
            }
            lambda = 0.0;
        }
        sigmas.col(i) = decomp.loadings.col(i) * std::sqrt(lambda / dt);
    }
    VolLoadings out{grid, std::move(sigmas)};
    out.validate();
    return out;
}

namespace {

/// Antiderivative of a piecewise-linear function with flat extension, F(x_0) = 0.
class LinearAntiderivative {
public:
    LinearAntiderivative(const MaturityGrid& grid, const Eigen::Ref<const Vector>& values)
        : x_(grid.points()), y_(values.data(), values.data() + values.size()), cum_(x_.size(), 0.0) {
        for (std::size_t k = 1; k < x_.size(); ++k) {
            cum_[k] = cum_[k - 1] + 0.5 * (y_[k] + y_[k - 1]) * (x_[k] - x_[k - 1]);
        }
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        if (x <= x_[0]) return y_[0] * (x - x_[0]);
        if (x >= x_[n - 1]) return cum_[n - 1] + y_[n - 1] * (x - x_[n - 1]);
        const std::size_t k =
            static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        const double h = x - x_[k];
        const double slope = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
        return cum_[k] + y_[k] * h + 0.5 * slope * h * h;
    }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> cum_;
};

}  // namespace

double pca_integrated_variance(const VolLoadings& vol, double expiry, double maturity, int outer_intervals) {
    vol.validate();
    if (!(expiry > 0.0) || !(maturity > expiry)) {
        throw DataError("pca_integrated_variance: need 0 < expiry < maturity");
    }
    if (outer_intervals < 200 || outer_intervals % 2 != 0) {
        throw UsageError("pca_integrated_variance: outer_intervals must be even and >= 200");
    }
    const double h = expiry / outer_intervals;
    double total = 0.0;
    for (Eigen::Index i = 0; i < vol.sigmas.cols(); ++i) {
        const LinearAntiderivative F(vol.grid, vol.sigmas.col(i));
        double acc = 0.0;
        for (int j = 0; j <= outer_intervals; ++j) {
            const double s = j * h;
            const double inner = F(maturity - s) - F(expiry - s);
            const double wgt = (j == 0 || j == outer_intervals) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            acc += wgt * inner * inner;
        }
        total += acc * h / 3.0;
    }
    return total;
}

}  // namespace fwdpca
