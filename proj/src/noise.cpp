#include "fwdpca/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fwdpca/errors.hpp"

namespace fwdpca {

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::iid_gaussian: return "iid_gaussian";
        case NoiseKind::mme_on_forward: return "mme_on_forward";
        case NoiseKind::mme_on_yield: return "mme_on_yield";
        case NoiseKind::spline_ies: return "spline_ies";
    }
    return "?";
}

std::string_view to_string(VarianceUnits units) { return units == VarianceUnits::percent ? "percent" : "decimal"; }

std::string_view to_string(OmissionPattern pattern) {
    return pattern == OmissionPattern::per_replication ? "per_replication" : "per_date";
}

NoiseKind noise_kind_from_string(std::string_view text) {
    for (auto k : {NoiseKind::none, NoiseKind::iid_gaussian, NoiseKind::mme_on_forward, NoiseKind::mme_on_yield,
                   NoiseKind::spline_ies}) {
        if (text == to_string(k)) return k;
    }
    throw DataError("unknown noise kind '" + std::string(text) + "'");
}

VarianceUnits variance_units_from_string(std::string_view text) {
    if (text == "percent") return VarianceUnits::percent;
    if (text == "decimal") return VarianceUnits::decimal;
    throw DataError("unknown variance units '" + std::string(text) + "' (expected percent or decimal)");
}

OmissionPattern omission_pattern_from_string(std::string_view text) {
    if (text == "per_replication") return OmissionPattern::per_replication;
    if (text == "per_date") return OmissionPattern::per_date;
    throw DataError("unknown omission pattern '" + std::string(text) + "'");
}

double NoiseSpec::decimal_variance() const { return units == VarianceUnits::percent ? variance * 1e-4 : variance; }

void NoiseSpec::validate(std::size_t n) const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw DataError("noise variance must be nonnegative");
    if (kind == NoiseKind::spline_ies && omit_count + 3 > n) {
        throw DataError("spline_ies: cannot omit " + std::to_string(omit_count) + " of " + std::to_string(n) +
                        " maturities (the spline needs 3 knots)");
    }
    if (kind == NoiseKind::spline_ies && spline_end == SplineEnd::not_a_knot && omit_count + 4 > n) {
        throw DataError("spline_ies: not-a-knot spline needs 4 remaining knots");
    }
}

Matrix gaussian_noise(Eigen::Index rows, Eigen::Index cols, double variance, Rng& rng) {
    if (!(variance >= 0.0)) throw DataError("noise variance must be nonnegative");
    Matrix eps(rows, cols);
    if (variance == 0.0) {
        eps.setZero();
        return eps;
    }
    const double sd = std::sqrt(variance);
    for (Eigen::Index t = 0; t < rows; ++t)
        for (Eigen::Index k = 0; k < cols; ++k) eps(t, k) = sd * rng.normal();
    return eps;
}

CurvePanel add_iid_gaussian(const CurvePanel& panel, double variance, Rng& rng) {
    if (panel.transform() != Transform::level) throw DataError("add_iid_gaussian: expected a level panel");
    Matrix eps = gaussian_noise(panel.rows(), panel.cols(), variance, rng);
    return panel.with_values(panel.values() + eps);
}

ObservedCurves contaminate_forward(const CurvePanel& forward, const Matrix& eps) {
    if (forward.kind() != CurveKind::forward || forward.transform() != Transform::level) {
        throw DataError("mme_forward: expected a forward level panel");
    }
    if (eps.rows() != forward.rows() || eps.cols() != forward.cols()) {
        throw DataError("mme_forward: noise shape does not match the panel");
    }
    CurvePanel x = forward.with_values(forward.values() + eps);
    CurvePanel z = forward_to_yield(x);
    return {std::move(x), std::move(z)};
}

ObservedCurves mme_forward(const CurvePanel& forward, double variance, Rng& rng) {
    return contaminate_forward(forward, gaussian_noise(forward.rows(), forward.cols(), variance, rng));
}

ObservedCurves contaminate_yield(const CurvePanel& yield, const Matrix& eta) {
    if (yield.kind() != CurveKind::yield || yield.transform() != Transform::level) {
        throw DataError("mme_yield: expected a yield level panel");
    }
    if (yield.grid().size() < 3) throw DataError("mme_yield: needs at least 3 maturities");
    if (eta.rows() != yield.rows() || eta.cols() != yield.cols()) {
        throw DataError("mme_yield: noise shape does not match the panel");
    }
    CurvePanel z = yield.with_values(yield.values() + eta);
    CurvePanel x = yield_to_forward(z);
    return {std::move(x), std::move(z)};
}

ObservedCurves mme_yield(const CurvePanel& yield, double variance, Rng& rng) {
    return contaminate_yield(yield, gaussian_noise(yield.rows(), yield.cols(), variance, rng));
}

std::vector<std::size_t> draw_omitted_maturities(std::size_t n, std::size_t count, Rng& rng) {
    if (count + 3 > n) {
        throw DataError("spline_ies: cannot omit " + std::to_string(count) + " of " + std::to_string(n) +
                        " maturities");
    }
    std::vector<std::size_t> interior(n - 2);
    std::iota(interior.begin(), interior.end(), std::size_t{1});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(interior.size() - i);
        std::swap(interior[i], interior[j]);
    }
    std::vector<std::size_t> chosen(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

namespace {

void check_omission(std::size_t n, const std::vector<std::size_t>& omitted, SplineEnd end) {
    for (std::size_t i = 0; i < omitted.size(); ++i) {
        if (omitted[i] == 0 || omitted[i] + 1 >= n) {
            throw DataError("spline_ies: end maturities cannot be omitted");
        }
        if (i > 0 && omitted[i] <= omitted[i - 1]) {
            throw DataError("spline_ies: omitted indices must be sorted and distinct");
        }
    }
    const std::size_t need = end == SplineEnd::natural ? 3 : 4;
    if (n < omitted.size() + need) throw DataError("spline_ies: too many omitted maturities");
}

void interpolate_row(const MaturityGrid& grid, const std::vector<std::size_t>& omitted, SplineEnd end,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
    if (omitted.empty()) return;
    std::vector<double> xs, ys;
    xs.reserve(grid.size());
    ys.reserve(grid.size());
    std::size_t o = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (o < omitted.size() && omitted[o] == k) {
            ++o;
            continue;
        }
        xs.push_back(grid[k]);
        ys.push_back(row[static_cast<Eigen::Index>(k)]);
    }
    const CubicSpline spline(xs, ys, end);
    for (std::size_t k : omitted) row[static_cast<Eigen::Index>(k)] = spline(grid[k]);
}

ObservedCurves finish_from_prices(const CurvePanel& prices, Matrix filled) {
    CurvePanel z = price_to_yield(prices.with_values(std::move(filled)));
    CurvePanel x = yield_to_forward(z);
    return {std::move(x), std::move(z)};
}

void require_prices(const CurvePanel& prices) {
    if (prices.kind() != CurveKind::price || prices.transform() != Transform::level) {
        throw DataError("spline_ies: expected a price level panel");
    }
}

}  // namespace

ObservedCurves spline_ies_at(const CurvePanel& prices, const std::vector<std::size_t>& omitted, SplineEnd end) {
    require_prices(prices);
    check_omission(prices.grid().size(), omitted, end);
    Matrix filled = prices.values();
    for (Eigen::Index t = 0; t < filled.rows(); ++t) interpolate_row(prices.grid(), omitted, end, filled.row(t));
    return finish_from_prices(prices, std::move(filled));
}

SplineIesResult spline_ies(const CurvePanel& prices, std::size_t omit_count, Rng& rng, OmissionPattern pattern,
                           SplineEnd end) {
    require_prices(prices);
    const std::size_t n = prices.grid().size();
    if (pattern == OmissionPattern::per_replication) {
        std::vector<std::size_t> omitted = draw_omitted_maturities(n, omit_count, rng);
        ObservedCurves curves = spline_ies_at(prices, omitted, end);
        return {std::move(curves), {std::move(omitted)}};
    }
    std::vector<std::vector<std::size_t>> patterns;
    patterns.reserve(static_cast<std::size_t>(prices.rows()));
    Matrix filled = prices.values();
    for (Eigen::Index t = 0; t < filled.rows(); ++t) {
        patterns.push_back(draw_omitted_maturities(n, omit_count, rng));
        check_omission(n, patterns.back(), end);
        interpolate_row(prices.grid(), patterns.back(), end, filled.row(t));
    }
    return {finish_from_prices(prices, std::move(filled)), std::move(patterns)};
}

}  // namespace fwdpca
