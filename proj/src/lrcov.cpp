#include "fwdpca/lrcov.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fwdpca/errors.hpp"
#include "fwdpca/linalg.hpp"

namespace fwdpca {

std::string_view to_string(Estimator e) {
    switch (e) {
        case Estimator::static_cov: return "static";
        case Estimator::andrews_qs: return "andrews_qs";
        case Estimator::vk_bartlett: return "vk_bartlett";
        case Estimator::mueller_ua: return "mueller_ua";
    }
    return "?";
}

Estimator estimator_from_string(std::string_view text) {
    if (text == "static") return Estimator::static_cov;
    if (text == "andrews_qs" || text == "andrews") return Estimator::andrews_qs;
    if (text == "vk_bartlett" || text == "vk") return Estimator::vk_bartlett;
    if (text == "mueller_ua" || text == "mueller") return Estimator::mueller_ua;
    throw UsageError("unknown estimator '" + std::string(text) + "'");
}

std::string_view to_string(UaVariant v) { return v == UaVariant::projection ? "projection" : "literal_residual"; }

UaVariant ua_variant_from_string(std::string_view text) {
    if (text == "projection") return UaVariant::projection;
    if (text == "literal_residual") return UaVariant::literal_residual;
    throw UsageError("unknown UA variant '" + std::string(text) + "'");
}

Matrix demean(const Matrix& w) {
    if (w.rows() == 0) return w;
    const Eigen::RowVectorXd mean = w.colwise().mean();
    return w.rowwise() - mean;
}

Matrix autocovariance(const Matrix& w, Eigen::Index j) {
    const Eigen::Index T = w.rows();
    if (j < 0 || j >= T) {
        throw DataError("autocovariance: lag " + std::to_string(j) + " outside [0, " + std::to_string(T - 1) + "]");
    }
    const Matrix u = demean(w);
    // sum_{t=j}^{T-1} u_t u_{t-j}^T
    return u.bottomRows(T - j).transpose() * u.topRows(T - j) / static_cast<double>(T);
}

namespace {

void require_rows(const Matrix& w, Eigen::Index min_rows, const char* who) {
    if (w.rows() < min_rows) {
        throw DataError(std::string(who) + ": needs T >= " + std::to_string(min_rows) + ", got " +
                        std::to_string(w.rows()));
    }
    if (w.cols() < 1) throw DataError(std::string(who) + ": panel has no columns");
    if (!w.allFinite()) throw DataError(std::string(who) + ": panel contains non-finite values");
}

CovarianceEstimate finish(Matrix raw, Estimator kind, Eigen::Index T) {
    PsdProjection psd = clip_to_psd(raw);
    CovarianceEstimate out;
    out.matrix = std::move(psd.matrix);
    out.estimator = kind;
    out.T = T;
    out.clipped = psd.clipped;
    return out;
}

}  // namespace

CovarianceEstimate static_cov(const Matrix& w) {
    require_rows(w, 2, "static_cov");
    const Matrix u = demean(w);
    return finish(u.transpose() * u / static_cast<double>(w.rows()), Estimator::static_cov, w.rows());
}

double qs_kernel(double x) {
    const double z = 6.0 * std::numbers::pi * x / 5.0;
    const double z2 = z * z;
    if (std::abs(z) < 1e-3) return 1.0 - z2 / 10.0 + z2 * z2 / 280.0;
    return 3.0 / z2 * (std::sin(z) / z - std::cos(z));
}

double andrews_bandwidth(const Matrix& w) {
    require_rows(w, 3, "andrews_bandwidth");
    const Matrix u = demean(w);
    const Eigen::Index T = u.rows();
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        const Eigen::VectorXd col = u.col(k);
        if (col.squaredNorm() / static_cast<double>(T) < 1e-14) continue;
        const auto lagged = col.head(T - 1);
        const auto lead = col.tail(T - 1);
        const double sxx = lagged.squaredNorm();
        if (sxx <= 0.0) continue;
        double rho = lagged.dot(lead) / sxx;
        rho = std::clamp(rho, -0.97, 0.97);
        const double s2 = (lead - rho * lagged).squaredNorm() / static_cast<double>(T - 1);
        const double s4 = s2 * s2;
        num += 4.0 * rho * rho * s4 / std::pow(1.0 - rho, 8);
        den += s4 / std::pow(1.0 - rho, 4);
    }
    if (den <= 0.0) return 0.0;
    return 1.3221 * std::pow(num / den * static_cast<double>(T), 0.2);
}

Matrix kernel_weighted_sum(const Matrix& w, const Eigen::VectorXd& lag_weights) {
    const Eigen::Index T = w.rows();
    if (lag_weights.size() != T) throw DataError("kernel_weighted_sum: need one weight per lag 0..T-1");
    const Matrix u = demean(w);
    // (W u)_s = sum_t k_{|s-t|} u_t
    Matrix wu = Matrix::Zero(T, u.cols());
    for (Eigen::Index s = 0; s < T; ++s) {
        for (Eigen::Index t = 0; t < T; ++t) {
            const double k = lag_weights[s > t ? s - t : t - s];
            if (k != 0.0) wu.row(s).noalias() += k * u.row(t);
        }
    }
    Matrix v = u.transpose() * wu / static_cast<double>(T);
    return symmetrize(v);
}

CovarianceEstimate andrews_lrcm(const Matrix& w, std::optional<double> bandwidth) {
    require_rows(w, 8, "andrews_lrcm");
    if (bandwidth && !(*bandwidth > 0.0)) throw UsageError("andrews_lrcm: bandwidth override must be positive");
    const double b = bandwidth ? *bandwidth : andrews_bandwidth(w);
    const Eigen::Index T = w.rows();
    Eigen::VectorXd weights = Eigen::VectorXd::Zero(T);
    weights[0] = 1.0;
    if (b > 0.0) {
        for (Eigen::Index j = 1; j < T; ++j) weights[j] = qs_kernel(static_cast<double>(j) / b);
    }
    CovarianceEstimate out = finish(kernel_weighted_sum(w, weights), Estimator::andrews_qs, T);
    out.bandwidth = b;
    return out;
}

CovarianceEstimate vk_lrcm(const Matrix& w) {
    require_rows(w, 2, "vk_lrcm");
    const Matrix u = demean(w);
    const Eigen::Index T = u.rows();
    Matrix acc = Matrix::Zero(u.cols(), u.cols());
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(u.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
        s += u.row(t);
        acc.noalias() += s.transpose() * s;
    }
    const double td = static_cast<double>(T);
    CovarianceEstimate out = finish(acc * (2.0 / (td * td)), Estimator::vk_bartlett, T);
    out.bandwidth = td;
    return out;
}

Matrix cosine_basis(Eigen::Index T, int p) {
    Matrix basis(T, p);
    const double scale = std::sqrt(2.0 / static_cast<double>(T));
    for (int l = 1; l <= p; ++l) {
        for (Eigen::Index t = 1; t <= T; ++t) {
            basis(t - 1, l - 1) = scale * std::cos(l * std::numbers::pi * (static_cast<double>(t) - 0.5) /
                                                   static_cast<double>(T));
        }
    }
    return basis;
}

CovarianceEstimate mueller_ua(const Matrix& w, int p, UaVariant variant) {
    require_rows(w, 2, "mueller_ua");
    if (p < 1 || p >= w.rows()) {
        throw UsageError("mueller_ua: p must satisfy 1 <= p < T, got p = " + std::to_string(p));
    }
    const Matrix u = demean(w);
    const Matrix basis = cosine_basis(u.rows(), p);
    const Matrix lambda = basis.transpose() * u;  // p x n
    Matrix v;
    if (variant == UaVariant::projection) {
        v = lambda.transpose() * lambda / static_cast<double>(p);
    } else {
        const Eigen::RowVectorXd total = (u - basis * lambda).colwise().sum();
        v = total.transpose() * total / static_cast<double>(p);
    }
    CovarianceEstimate out = finish(std::move(v), Estimator::mueller_ua, w.rows());
    out.p = p;
    return out;
}

CovarianceEstimate estimate(const Matrix& w, const EstimatorSpec& spec) {
    switch (spec.kind) {
        case Estimator::static_cov: return static_cov(w);
        case Estimator::andrews_qs: return andrews_lrcm(w, spec.bandwidth);
        case Estimator::vk_bartlett: return vk_lrcm(w);
        case Estimator::mueller_ua: return mueller_ua(w, spec.p, spec.ua_variant);
    }
    throw UsageError("unknown estimator");
}

}  // namespace fwdpca
