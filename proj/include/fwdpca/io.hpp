#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fwdpca/curves.hpp"
#include "fwdpca/experiments.hpp"
#include "fwdpca/lrcov.hpp"
#include "fwdpca/pca.hpp"

namespace fwdpca {

// Panel CSV:
//   # kind=forward
//   # transform=level
//   # dt=0.003968253968253968
//   date,0.25,0.5,...        maturities in years
//   0,0.051,0.052,...        label, then decimal values
// Numbers are written with %.17g so a write/read cycle is exact.

void write_panel_csv(std::ostream& out, const CurvePanel& panel, const std::vector<std::string>& labels = {});
void write_panel_csv(const std::filesystem::path& path, const CurvePanel& panel,
                     const std::vector<std::string>& labels = {});

struct LabelledPanel {
    CurvePanel panel;
    std::vector<std::string> labels;
};

/// Metadata lines are required (kind, transform, dt). Ragged or non-numeric
/// rows raise DataError naming the 1-based data row.
LabelledPanel read_panel_csv(std::istream& in);
LabelledPanel read_panel_csv(const std::filesystem::path& path);

/// Square matrix with row and column labels and "# key=value" metadata.
struct LabelledMatrix {
    Matrix values;
    std::vector<double> maturities;
    std::map<std::string, std::string> metadata;
};

void write_matrix_csv(std::ostream& out, const LabelledMatrix& m);
LabelledMatrix read_matrix_csv(std::istream& in);
LabelledMatrix read_matrix_csv(const std::filesystem::path& path);

LabelledMatrix covariance_to_matrix(const CovarianceEstimate& cov, const MaturityGrid& grid);

/// Rows: eigenvalue, cum_r2, then one loading row per maturity; column k is
/// component k.
void write_decomposition_csv(std::ostream& out, const PcaDecomposition& d, const std::vector<double>& maturities);

enum class MaturityUnit { months, years };
enum class RateUnit { percent, decimal };

/// JSON manifest describing a raw panel file:
///   {"path": "fb.csv", "layout": "dates_in_rows", "maturity_unit": "months",
///    "rate_unit": "percent", "kind": "yield", "frequency": "monthly"}
/// frequency is daily, weekly, monthly, quarterly, annual or a dt in years.
/// The raw file is a header (label, maturities) followed by label, values
/// rows; "#" lines are comments, except "# kind=..." which must agree with
/// the manifest.
struct DatasetManifest {
    std::filesystem::path path;
    MaturityUnit maturity_unit = MaturityUnit::years;
    RateUnit rate_unit = RateUnit::decimal;
    CurveKind kind = CurveKind::yield;
    double dt = 1.0 / 12.0;
};

/// Every key except the optional "layout" is required; relative paths
/// resolve against `base_dir`.
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

LabelledPanel ingest_panel(const DatasetManifest& manifest);

/// Single-shot factor analysis of an observed level panel: builds the
/// counterpart curve, differences both and runs every estimator on X, Z, dX, dZ.
ExperimentReport empirical_factor_analysis(const CurvePanel& panel, const std::vector<EstimatorSpec>& estimators,
                                           double threshold = 0.99);

}  // namespace fwdpca
