#include "fwdpca/curves.hpp"

#include <cmath>
#include <string>

#include "fwdpca/errors.hpp"

namespace fwdpca {

namespace {

constexpr double kTreasuryMonths[] = {3, 6, 9, 12, 15, 18, 21, 24, 30, 36, 48, 60, 72, 90, 108, 120};
constexpr double kTreasuryMonthsLiteral[] = {3, 6, 9, 12, 15, 18, 21, 24, 30, 36, 40, 60, 72, 90, 108, 120};

void require_level(const CurvePanel& panel, CurveKind kind, const char* op) {
    if (panel.kind() != kind) {
        throw DataError(std::string(op) + ": expected a " + std::string(to_string(kind)) + " panel, got " +
                        std::string(to_string(panel.kind())));
    }
    if (panel.transform() != Transform::level) {
        throw DataError(std::string(op) + ": expected a level panel");
    }
}

// Derivative stencil at point k: (offset, weight) pairs.
struct Stencil {
    Eigen::Index first;
    double w[3];
    int len;
};

Stencil derivative_stencil(const MaturityGrid& grid, std::size_t k) {
    const std::size_t n = grid.size();
    if (k == 0) {
        const double h = grid[1] - grid[0];
        return {0, {-1.0 / h, 1.0 / h, 0.0}, 2};
    }
    if (k == n - 1) {
        const double h = grid[n - 1] - grid[n - 2];
        return {static_cast<Eigen::Index>(n - 2), {-1.0 / h, 1.0 / h, 0.0}, 2};
    }
    const double h1 = grid[k] - grid[k - 1];
    const double h2 = grid[k + 1] - grid[k];
    return {static_cast<Eigen::Index>(k - 1),
            {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))},
            3};
}

}  // namespace

MaturityGrid::MaturityGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
        throw DataError("maturity grid needs at least two points");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i]) || points_[i] <= 0.0) {
            throw DataError("maturity grid points must be finite and positive (index " + std::to_string(i) + ")");
        }
        if (i > 0 && points_[i] <= points_[i - 1]) {
            throw DataError("maturity grid must be strictly increasing (index " + std::to_string(i) + ")");
        }
    }
}

MaturityGrid MaturityGrid::from_months(std::span<const double> months) {
    std::vector<double> years;
    years.reserve(months.size());
    for (double m : months) years.push_back(m / 12.0);
    return MaturityGrid(std::move(years));
}

MaturityGrid MaturityGrid::treasury16() { return from_months(kTreasuryMonths); }

MaturityGrid MaturityGrid::treasury16_literal() { return from_months(kTreasuryMonthsLiteral); }

std::string_view to_string(CurveKind kind) {
    switch (kind) {
        case CurveKind::forward: return "forward";
        case CurveKind::yield: return "yield";
        case CurveKind::price: return "price";
    }
    return "?";
}

std::string_view to_string(Transform transform) {
    return transform == Transform::level ? "level" : "first_difference";
}

CurveKind curve_kind_from_string(std::string_view text) {
    if (text == "forward") return CurveKind::forward;
    if (text == "yield") return CurveKind::yield;
    if (text == "price") return CurveKind::price;
    throw DataError("unknown curve kind '" + std::string(text) + "'");
}

Transform transform_from_string(std::string_view text) {
    if (text == "level") return Transform::level;
    if (text == "first_difference") return Transform::first_difference;
    throw DataError("unknown transform '" + std::string(text) + "'");
}

CurvePanel::CurvePanel(MaturityGrid grid, Matrix values, CurveKind kind, Transform transform, double dt)
    : grid_(std::move(grid)), values_(std::move(values)), kind_(kind), transform_(transform), dt_(dt) {
    if (static_cast<std::size_t>(values_.cols()) != grid_.size()) {
        throw DataError("panel has " + std::to_string(values_.cols()) + " columns but the grid has " +
                        std::to_string(grid_.size()) + " maturities");
    }
    if (values_.rows() < 1) throw DataError("panel needs at least one row");
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw DataError("panel dt must be positive");
}

CurvePanel CurvePanel::with_values(Matrix values) const {
    return CurvePanel(grid_, std::move(values), kind_, transform_, dt_);
}

CurvePanel CurvePanel::with_values(Matrix values, CurveKind kind) const {
    return CurvePanel(grid_, std::move(values), kind, transform_, dt_);
}

CurvePanel forward_to_yield(const CurvePanel& forward) {
    require_level(forward, CurveKind::forward, "forward_to_yield");
    const auto& grid = forward.grid();
    const Matrix& r = forward.values();
    Matrix y(r.rows(), r.cols());
    for (Eigen::Index t = 0; t < r.rows(); ++t) {
        double integral = grid[0] * r(t, 0);
        y(t, 0) = integral / grid[0];
        for (Eigen::Index k = 1; k < r.cols(); ++k) {
            integral += 0.5 * (grid[k] - grid[k - 1]) * (r(t, k - 1) + r(t, k));
            y(t, k) = integral / grid[k];
        }
    }
    return forward.with_values(std::move(y), CurveKind::yield);
}

CurvePanel yield_to_forward(const CurvePanel& yield) {
    require_level(yield, CurveKind::yield, "yield_to_forward");
    const auto& grid = yield.grid();
    if (grid.size() < 3) {
        throw DataError("yield_to_forward: needs at least 3 maturities");
    }
    const Matrix& y = yield.values();
    Matrix r(y.rows(), y.cols());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Stencil s = derivative_stencil(grid, k);
        const auto col = static_cast<Eigen::Index>(k);
        for (Eigen::Index t = 0; t < y.rows(); ++t) {
            double slope = 0.0;
            for (int i = 0; i < s.len; ++i) slope += s.w[i] * y(t, s.first + i);
            r(t, col) = y(t, col) + grid[k] * slope;
        }
    }
    return yield.with_values(std::move(r), CurveKind::forward);
}

CurvePanel price_to_yield(const CurvePanel& price) {
    require_level(price, CurveKind::price, "price_to_yield");
    const auto& grid = price.grid();
    const Matrix& p = price.values();
    Matrix y(p.rows(), p.cols());
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            const double v = p(t, k);
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw DataError("price_to_yield: non-positive price at row " + std::to_string(t) + ", column " +
                                std::to_string(k));
            }
            y(t, k) = -std::log(v) / grid[static_cast<std::size_t>(k)];
        }
    }
    return price.with_values(std::move(y), CurveKind::yield);
}

CurvePanel yield_to_price(const CurvePanel& yield) {
    require_level(yield, CurveKind::yield, "yield_to_price");
    const auto& grid = yield.grid();
    const Matrix& y = yield.values();
    Matrix p(y.rows(), y.cols());
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
        for (Eigen::Index k = 0; k < y.cols(); ++k) {
            p(t, k) = std::exp(-grid[static_cast<std::size_t>(k)] * y(t, k));
        }
    }
    return yield.with_values(std::move(p), CurveKind::price);
}

CurvePanel first_difference(const CurvePanel& panel) {
    if (panel.transform() != Transform::level) {
        throw DataError("first_difference: panel is already differenced");
    }
    if (panel.rows() < 2) {
        throw DataError("first_difference: needs at least two rows");
    }
    const Eigen::Index T = panel.rows();
    Matrix d = panel.values().bottomRows(T - 1) - panel.values().topRows(T - 1);
    return CurvePanel(panel.grid(), std::move(d), panel.kind(), Transform::first_difference, panel.dt());
}

CurvePanel cumulative_sum(const CurvePanel& increments, const Vector& initial) {
    if (increments.transform() != Transform::first_difference) {
        throw DataError("cumulative_sum: expected a first-difference panel");
    }
    if (initial.size() != increments.cols()) {
        throw DataError("cumulative_sum: initial row has the wrong length");
    }
    Matrix levels(increments.rows() + 1, increments.cols());
    levels.row(0) = initial.transpose();
    for (Eigen::Index t = 0; t < increments.rows(); ++t) {
        levels.row(t + 1) = levels.row(t) + increments.values().row(t);
    }
    return CurvePanel(increments.grid(), std::move(levels), increments.kind(), Transform::level, increments.dt());
}

DiscreteOperator discrete_averaging_operator(const MaturityGrid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Matrix J = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // weights of the integral from 0 to x_k, then divide by x_k
        J(k, 0) = grid[0];
        for (Eigen::Index i = 1; i <= k; ++i) {
            const double h = grid[static_cast<std::size_t>(i)] - grid[static_cast<std::size_t>(i - 1)];
            J(k, i - 1) += 0.5 * h;
            J(k, i) += 0.5 * h;
        }
        J.row(k) /= grid[static_cast<std::size_t>(k)];
    }
    return {std::move(J), OperatorRole::averaging};
}

Matrix maturity_derivative_matrix(const MaturityGrid& grid) {
    if (grid.size() < 3) {
        throw DataError("maturity derivative needs at least 3 maturities");
    }
    const auto n = static_cast<Eigen::Index>(grid.size());
    Matrix D = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Stencil s = derivative_stencil(grid, k);
        for (int i = 0; i < s.len; ++i) D(static_cast<Eigen::Index>(k), s.first + i) = s.w[i];
    }
    return D;
}

DiscreteOperator discrete_differentiation_operator(const MaturityGrid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Vector x = Eigen::Map<const Vector>(grid.points().data(), n);
    Matrix L = Matrix::Identity(n, n) + x.asDiagonal() * maturity_derivative_matrix(grid);
    return {std::move(L), OperatorRole::identity_plus_x_derivative};
}

}  // namespace fwdpca
