#include "fwdpca/linalg.hpp"

#include <cmath>

#include "fwdpca/errors.hpp"

namespace fwdpca {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps) {
    if (symmetric.rows() != symmetric.cols()) {
        throw DataError("jacobi_eigen: matrix is not square");
    }
    const Eigen::Index n = symmetric.rows();
    Matrix a = symmetrize(symmetric);
    Matrix v = Matrix::Identity(n, n);
    const double scale = a.squaredNorm();

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off == 0.0 || off <= 1e-30 * scale) break;

        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == max_sweeps) {
        throw NumericalError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) + " sweeps");
    }
    return {a.diagonal(), std::move(v), sweep};
}

double max_asymmetry(const Matrix& a) {
    if (a.rows() != a.cols()) return INFINITY;
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

PsdProjection clip_to_psd(const Matrix& a) {
    Matrix sym = symmetrize(a);
    if (sym.size() == 0) return {std::move(sym), 0.0};
    SymmetricEigen eig = jacobi_eigen(sym);
    double clipped = 0.0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values[i] < 0.0) {
            clipped += -eig.values[i];
            eig.values[i] = 0.0;
        }
    }
    if (clipped == 0.0) return {std::move(sym), 0.0};
    Matrix rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    return {symmetrize(rebuilt), clipped};
}

std::size_t numerical_rank(const Matrix& symmetric, double rel_tol) {
    if (symmetric.size() == 0) return 0;
    const SymmetricEigen eig = jacobi_eigen(symmetric);
    const double top = eig.values.cwiseAbs().maxCoeff();
    if (top == 0.0) return 0;
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values[i] > rel_tol * top) ++rank;
    }
    return rank;
}

}  // namespace fwdpca
