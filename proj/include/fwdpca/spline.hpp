#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace fwdpca {

enum class SplineEnd {
    /// zero second derivative at both end knots
    natural,
    /// continuous third derivative at the second and second-to-last knots;
    /// reproduces any cubic exactly (needs 4 knots)
    not_a_knot,
};

std::string_view to_string(SplineEnd end);
SplineEnd spline_end_from_string(std::string_view text);

/// Interpolating cubic spline through (knots, values).
class CubicSpline {
public:
    CubicSpline(std::span<const double> knots, std::span<const double> values, SplineEnd end = SplineEnd::natural);

    /// Outside the knot range the end cubic piece is continued.
    double operator()(double x) const;

    const std::vector<double>& second_derivatives() const noexcept { return m_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

}  // namespace fwdpca
