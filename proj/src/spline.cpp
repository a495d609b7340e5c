#include "fwdpca/spline.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Dense>

#include "fwdpca/errors.hpp"

namespace fwdpca {

std::string_view to_string(SplineEnd end) { return end == SplineEnd::natural ? "natural" : "not_a_knot"; }

SplineEnd spline_end_from_string(std::string_view text) {
    if (text == "natural") return SplineEnd::natural;
    if (text == "not_a_knot") return SplineEnd::not_a_knot;
    throw UsageError("unknown spline end condition '" + std::string(text) + "'");
}

CubicSpline::CubicSpline(std::span<const double> knots, std::span<const double> values, SplineEnd end)
    : x_(knots.begin(), knots.end()), y_(values.begin(), values.end()), m_(knots.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n != y_.size()) throw DataError("spline: knots and values differ in length");
    if (n < 3) throw DataError("spline: needs at least 3 knots");
    if (end == SplineEnd::not_a_knot && n < 4) throw DataError("spline: not-a-knot ends need at least 4 knots");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) throw DataError("spline: knots must be strictly increasing");
    }

    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    for (Eigen::Index i = 1; i + 1 < N; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double h0 = x_[u] - x_[u - 1];
        const double h1 = x_[u + 1] - x_[u];
        a(i, i - 1) = h0;
        a(i, i) = 2.0 * (h0 + h1);
        a(i, i + 1) = h1;
        rhs[i] = 6.0 * ((y_[u + 1] - y_[u]) / h1 - (y_[u] - y_[u - 1]) / h0);
    }
    if (end == SplineEnd::natural) {
        a(0, 0) = 1.0;
        a(N - 1, N - 1) = 1.0;
    } else {
        const double h0 = x_[1] - x_[0];
        const double h1 = x_[2] - x_[1];
        a(0, 0) = h1;
        a(0, 1) = -(h0 + h1);
        a(0, 2) = h0;
        const double g0 = x_[n - 2] - x_[n - 3];
        const double g1 = x_[n - 1] - x_[n - 2];
        a(N - 1, N - 3) = g1;
        a(N - 1, N - 2) = -(g0 + g1);
        a(N - 1, N - 1) = g0;
    }
    const Eigen::VectorXd m = a.partialPivLu().solve(rhs);
    for (std::size_t i = 0; i < n; ++i) m_[i] = m[static_cast<Eigen::Index>(i)];
}

double CubicSpline::operator()(double x) const {
    const std::size_t n = x_.size();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1);
    const double h = x_[i] - x_[i - 1];
    const double a = (x_[i] - x) / h;
    const double b = (x - x_[i - 1]) / h;
    return a * y_[i - 1] + b * y_[i] + ((a * a * a - a) * m_[i - 1] + (b * b * b - b) * m_[i]) * h * h / 6.0;
}

}  // namespace fwdpca
