#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fwdpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Ordered time-to-maturity points in years. Strictly increasing, positive,
/// at least two points.
class MaturityGrid {
public:
    explicit MaturityGrid(std::vector<double> points);

    /// Grid built from maturities quoted in months.
    static MaturityGrid from_months(std::span<const double> months);

    /// The 16 listed Treasury maturities: 3..24 quarterly, 30, 36, 48, 60,
    /// 72, 90, 108, 120 months.
    static MaturityGrid treasury16();

    /// Same as treasury16() but with 40 months in place of 48.
    static MaturityGrid treasury16_literal();

    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }
    const std::vector<double>& points() const noexcept { return points_; }

    bool operator==(const MaturityGrid&) const = default;

private:
    std::vector<double> points_;
};

enum class CurveKind { forward, yield, price };
enum class Transform { level, first_difference };

std::string_view to_string(CurveKind kind);
std::string_view to_string(Transform transform);
CurveKind curve_kind_from_string(std::string_view text);
Transform transform_from_string(std::string_view text);

/// T x n panel of curve observations: rows are dates, columns follow the grid.
class CurvePanel {
public:
    CurvePanel(MaturityGrid grid, Matrix values, CurveKind kind, Transform transform, double dt);

    const MaturityGrid& grid() const noexcept { return grid_; }
    const Matrix& values() const noexcept { return values_; }
    CurveKind kind() const noexcept { return kind_; }
    Transform transform() const noexcept { return transform_; }
    double dt() const noexcept { return dt_; }
    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }

    /// Same metadata, new values (validated against the grid).
    CurvePanel with_values(Matrix values) const;
    CurvePanel with_values(Matrix values, CurveKind kind) const;

private:
    MaturityGrid grid_;
    Matrix values_;
    CurveKind kind_;
    Transform transform_;
    double dt_;
};

enum class OperatorRole {
    averaging,
    /// Id + diag(x) D: left inverse of averaging, i.e. r = y + x dy/dx.
    identity_plus_x_derivative,
};

struct DiscreteOperator {
    Matrix matrix;
    OperatorRole role;
};

/// y(x_k) = (1/x_k) * integral_0^{x_k} r, trapezoidal on the grid with the
/// forward held flat on [0, x_1].
CurvePanel forward_to_yield(const CurvePanel& forward);

/// r(x_k) = y(x_k) + x_k * dy/dx(x_k); second-order central differences on
/// interior points, one-sided at both ends.
CurvePanel yield_to_forward(const CurvePanel& yield);

CurvePanel price_to_yield(const CurvePanel& price);
CurvePanel yield_to_price(const CurvePanel& yield);

CurvePanel first_difference(const CurvePanel& panel);

/// Inverse of first_difference: prepends `initial` and accumulates.
CurvePanel cumulative_sum(const CurvePanel& increments, const Vector& initial);

/// Matrix J with forward_to_yield(panel).values() == panel.values() * J^T.
DiscreteOperator discrete_averaging_operator(const MaturityGrid& grid);

/// Matrix Lambda with yield_to_forward(panel).values() == panel.values() * Lambda^T.
DiscreteOperator discrete_differentiation_operator(const MaturityGrid& grid);

/// Finite-difference first-derivative matrix D used by yield_to_forward.
Matrix maturity_derivative_matrix(const MaturityGrid& grid);

}  // namespace fwdpca
