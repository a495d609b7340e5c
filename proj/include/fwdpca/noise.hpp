#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fwdpca/curves.hpp"
#include "fwdpca/rng.hpp"
#include "fwdpca/spline.hpp"

namespace fwdpca {

enum class NoiseKind { none, iid_gaussian, mme_on_forward, mme_on_yield, spline_ies };

/// Unit in which NoiseSpec::variance is quoted. Panels are always decimal, so
/// a variance quoted in percent^2 is scaled by 1e-4 before use.
enum class VarianceUnits { percent, decimal };

/// Which interior maturities a spline-IES replication omits: one draw shared
/// by every date, or a fresh draw per date.
enum class OmissionPattern { per_replication, per_date };

std::string_view to_string(NoiseKind kind);
std::string_view to_string(VarianceUnits units);
std::string_view to_string(OmissionPattern pattern);
NoiseKind noise_kind_from_string(std::string_view text);
VarianceUnits variance_units_from_string(std::string_view text);
OmissionPattern omission_pattern_from_string(std::string_view text);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double variance = 0.0035;
    VarianceUnits units = VarianceUnits::decimal;
    std::size_t omit_count = 4;
    OmissionPattern omission = OmissionPattern::per_replication;
    SplineEnd spline_end = SplineEnd::natural;
    std::uint64_t seed = 0;

    /// Variance in decimal^2, the unit of every panel.
    double decimal_variance() const;

    /// Checks the spec against a grid with n maturities.
    void validate(std::size_t n) const;
};

/// Observed forward (X) and yield (Z) panels produced by a contamination.
struct ObservedCurves {
    CurvePanel forward;
    CurvePanel yield;
};

/// Adds independent N(0, variance) draws, filled row by row.
CurvePanel add_iid_gaussian(const CurvePanel& panel, double variance, Rng& rng);

/// Draws a rows x cols matrix of independent N(0, variance), row by row.
Matrix gaussian_noise(Eigen::Index rows, Eigen::Index cols, double variance, Rng& rng);

/// X = r + eps, Z = forward_to_yield(X).
ObservedCurves contaminate_forward(const CurvePanel& forward, const Matrix& eps);
ObservedCurves mme_forward(const CurvePanel& forward, double variance, Rng& rng);

/// Z = y + eta, X = yield_to_forward(Z).
ObservedCurves contaminate_yield(const CurvePanel& yield, const Matrix& eta);
ObservedCurves mme_yield(const CurvePanel& yield, double variance, Rng& rng);

/// Sorted distinct interior column indices (never 0 or n-1).
std::vector<std::size_t> draw_omitted_maturities(std::size_t n, std::size_t count, Rng& rng);

/// Replaces the prices at `omitted` maturities on every date by a cubic
/// spline through the remaining maturities, then Z = price_to_yield and
/// X = yield_to_forward(Z).
ObservedCurves spline_ies_at(const CurvePanel& prices, const std::vector<std::size_t>& omitted,
                             SplineEnd end = SplineEnd::natural);

struct SplineIesResult {
    ObservedCurves curves;
    /// One entry per date for OmissionPattern::per_date, otherwise one entry.
    std::vector<std::vector<std::size_t>> omitted;
};

SplineIesResult spline_ies(const CurvePanel& prices, std::size_t omit_count, Rng& rng,
                           OmissionPattern pattern = OmissionPattern::per_replication,
                           SplineEnd end = SplineEnd::natural);

}  // namespace fwdpca
