#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fwdpca/curves.hpp"
#include "fwdpca/lrcov.hpp"
#include "fwdpca/models.hpp"
#include "fwdpca/noise.hpp"

namespace fwdpca {

enum class Dgp { gaussian_hjm, cir3, g2pp };
enum class Series { X, Z, dX, dZ };
enum class ExperimentMode { factors, pricing };

std::string_view to_string(Dgp d);
std::string_view to_string(Series s);
std::string_view to_string(ExperimentMode m);
Dgp dgp_from_string(std::string_view text);
Series series_from_string(std::string_view text);
ExperimentMode mode_from_string(std::string_view text);

/// Which difference panel feeds the pricing PCA.
enum class PricingInput { forward, yield };

struct PricingOption {
    double expiry;
    double strike;
};

struct PricingSpec {
    double maturity = 10.0;
    std::vector<PricingOption> options;
    /// Factors retained: count_factors at `threshold`, unless fixed_m is set.
    double threshold = 0.999;
    std::optional<std::size_t> fixed_m;
    PricingInput input = PricingInput::forward;
    VolForm vol_form = VolForm::standard;

    /// T0 .25: K .45/.50/.55/.60; T0 .5: .48/.53/.58/.63; T0 1: .50/.55/.60/.65.
    static std::vector<PricingOption> default_options();
};

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::factors;
    Dgp dgp = Dgp::gaussian_hjm;
    HjmVolSpec hjm = HjmVolSpec::default_three_factor();
    Cir3Params cir = Cir3Params::defaults();
    G2ppParams g2pp = G2ppParams::set1();
    /// Spline omission is redrawn every date unless the config says otherwise.
    NoiseSpec noise{.omission = OmissionPattern::per_date};
    std::vector<Series> series{Series::X, Series::Z, Series::dX, Series::dZ};
    std::vector<EstimatorSpec> estimators;
    std::size_t T = 500;
    std::size_t reps = 200;
    double dt = 1.0 / 252.0;
    MaturityGrid grid = MaturityGrid::treasury16();
    std::uint64_t master_seed = 20240101;
    double threshold = 0.99;
    /// 0 = one per hardware thread.
    std::size_t workers = 0;
    std::optional<PricingSpec> pricing;

    /// All four estimators with their default options.
    static std::vector<EstimatorSpec> all_estimators(int p = 4);

    void validate() const;
};

/// Config <-> JSON. Unknown keys are rejected; missing keys take defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct FactorCell {
    Series series = Series::X;
    Estimator estimator = Estimator::static_cov;
    /// Mean over the non-degenerate replications.
    std::vector<double> mean_cum_r2;
    double mean_count = 0.0;
    /// count_factors applied to mean_cum_r2.
    std::size_t mean_curve_count = 0;
    /// histogram[k] = replications reporting k factors (index 0 unused).
    std::vector<std::size_t> histogram;
    std::size_t degenerate = 0;
    std::size_t reps = 0;

    /// Fraction of all replications reporting exactly k factors.
    double fraction(std::size_t k) const;
    bool operator==(const FactorCell&) const = default;
};

struct PricingCell {
    double expiry = 0.0;
    double strike = 0.0;
    Estimator estimator = Estimator::static_cov;
    double analytic = 0.0;
    double mse = 0.0;
    double bias = 0.0;
    /// Monte Carlo standard error of the MSE.
    double mse_se = 0.0;
    std::size_t nonpositive_variance = 0;
    double mean_factors = 0.0;
    bool operator==(const PricingCell&) const = default;
};

struct ExperimentReport {
    ExperimentMode mode = ExperimentMode::factors;
    nlohmann::json config;
    std::string code_version;
    std::vector<FactorCell> factors;
    std::vector<PricingCell> pricing;

    const FactorCell* find(Series s, Estimator e) const;
    const PricingCell* find(double expiry, double strike, Estimator e) const;
    bool operator==(const ExperimentReport&) const = default;
};

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

/// The four observed series of one replication.
struct SeriesPanels {
    CurvePanel X;
    CurvePanel Z;

    CurvePanel get(Series s) const;
};

/// Clean DGP draw followed by the configured contamination, for replication `rep`.
SeriesPanels simulate_observed(const ExperimentConfig& config, std::size_t rep);

/// Per-replication factor statistics for one panel set.
struct FactorObservation {
    std::vector<double> cum_r2;  // empty when degenerate
    std::size_t count = 0;
    bool degenerate = false;
};

std::vector<FactorObservation> observe_factors(const SeriesPanels& panels, const std::vector<Series>& series,
                                               const std::vector<EstimatorSpec>& estimators, double threshold);

/// Folds per-replication observations (outer index = replication) into cells.
std::vector<FactorCell> aggregate_factors(const std::vector<std::vector<FactorObservation>>& per_rep,
                                          const std::vector<Series>& series,
                                          const std::vector<EstimatorSpec>& estimators, std::size_t n,
                                          double threshold);

ExperimentReport run_factor_experiment(const ExperimentConfig& config);
ExperimentReport run_pricing_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes config.json, summary.json and the CSV tables for the report's mode
/// into `dir` (created if missing). Returns the files written.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Version string written into every report.
std::string_view code_version();

}  // namespace fwdpca
