#include "fwdpca/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "fwdpca/errors.hpp"

namespace fwdpca {

using nlohmann::json;

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Header plus data rows of a label-first CSV, with "# key=value" lines collected.
struct RawTable {
    std::map<std::string, std::string> metadata;
    std::vector<double> header;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
};

RawTable read_table(std::istream& in, const char* what) {
    RawTable t;
    std::string line;
    bool have_header = false;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            const std::string_view body = trim(view.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string_view::npos) {
                t.metadata[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
            }
            continue;
        }
        const auto cells = split(view);
        if (!have_header) {
            if (cells.size() < 2) throw DataError(std::string(what) + ": header has no maturity columns");
            for (std::size_t c = 1; c < cells.size(); ++c) {
                const auto x = parse_double(cells[c]);
                if (!x) {
                    throw DataError(std::string(what) + ": header column " + std::to_string(c + 1) + " ('" +
                                    std::string(cells[c]) + "') is not a maturity");
                }
                t.header.push_back(*x);
            }
            have_header = true;
            continue;
        }
        ++data_row;
        if (cells.size() != t.header.size() + 1) {
            throw DataError(std::string(what) + ": row " + std::to_string(data_row) + " has " +
                            std::to_string(cells.size() - 1) + " values, expected " +
                            std::to_string(t.header.size()));
        }
        std::vector<double> row;
        row.reserve(t.header.size());
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto v = parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) {
                throw DataError(std::string(what) + ": row " + std::to_string(data_row) + " column " +
                                std::to_string(c + 1) + " is missing or not a finite number");
            }
            row.push_back(*v);
        }
        t.labels.emplace_back(cells[0]);
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError(std::string(what) + ": no header row");
    if (t.rows.empty()) throw DataError(std::string(what) + ": no data rows");
    return t;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

const std::string& require_meta(const RawTable& t, const std::string& key, const char* what) {
    const auto it = t.metadata.find(key);
    if (it == t.metadata.end()) throw DataError(std::string(what) + ": missing '# " + key + "=' metadata line");
    return it->second;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

void write_panel_csv(std::ostream& out, const CurvePanel& panel, const std::vector<std::string>& labels) {
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(panel.rows())) {
        throw DataError("panel has " + std::to_string(panel.rows()) + " rows but " + std::to_string(labels.size()) +
                        " labels were given");
    }
    out << "# kind=" << to_string(panel.kind()) << '\n';
    out << "# transform=" << to_string(panel.transform()) << '\n';
    out << "# dt=" << num(panel.dt()) << '\n';
    out << "date";
    for (double x : panel.grid().points()) out << ',' << num(x);
    out << '\n';
    const Matrix& v = panel.values();
    for (Eigen::Index t = 0; t < v.rows(); ++t) {
        if (labels.empty()) {
            out << t;
        } else {
            out << labels[t];
        }
        for (Eigen::Index j = 0; j < v.cols(); ++j) out << ',' << num(v(t, j));
        out << '\n';
    }
}

void write_panel_csv(const std::filesystem::path& path, const CurvePanel& panel,
                     const std::vector<std::string>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_panel_csv(out, panel, labels);
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

LabelledPanel read_panel_csv(std::istream& in) {
    RawTable t = read_table(in, "panel csv");
    const CurveKind kind = curve_kind_from_string(require_meta(t, "kind", "panel csv"));
    const Transform transform = transform_from_string(require_meta(t, "transform", "panel csv"));
    const auto dt = parse_double(require_meta(t, "dt", "panel csv"));
    if (!dt) throw DataError("panel csv: dt metadata is not a number");
    return {CurvePanel(MaturityGrid(t.header), to_matrix(t.rows), kind, transform, *dt), std::move(t.labels)};
}

LabelledPanel read_panel_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_panel_csv(in);
}

void write_matrix_csv(std::ostream& out, const LabelledMatrix& m) {
    if (static_cast<std::size_t>(m.values.cols()) != m.maturities.size() || m.values.rows() != m.values.cols()) {
        throw DataError("matrix csv: matrix must be square with one label per column");
    }
    for (const auto& [k, v] : m.metadata) out << "# " << k << '=' << v << '\n';
    out << "maturity";
    for (double x : m.maturities) out << ',' << num(x);
    out << '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        out << num(m.maturities[i]);
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ',' << num(m.values(i, j));
        out << '\n';
    }
}

LabelledMatrix read_matrix_csv(std::istream& in) {
    RawTable t = read_table(in, "matrix csv");
    if (t.rows.size() != t.header.size()) {
        throw DataError("matrix csv: " + std::to_string(t.rows.size()) + " rows for " +
                        std::to_string(t.header.size()) + " columns");
    }
    return {to_matrix(t.rows), t.header, std::move(t.metadata)};
}

LabelledMatrix read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_matrix_csv(in);
}

LabelledMatrix covariance_to_matrix(const CovarianceEstimate& cov, const MaturityGrid& grid) {
    LabelledMatrix m{cov.matrix, grid.points(), {}};
    m.metadata["estimator"] = std::string(to_string(cov.estimator));
    m.metadata["T"] = std::to_string(cov.T);
    if (cov.bandwidth) m.metadata["bandwidth"] = num(*cov.bandwidth);
    if (cov.p) m.metadata["p"] = std::to_string(*cov.p);
    m.metadata["clipped"] = num(cov.clipped);
    return m;
}

void write_decomposition_csv(std::ostream& out, const PcaDecomposition& d, const std::vector<double>& maturities) {
    const Eigen::Index n = d.eigenvalues.size();
    if (static_cast<std::size_t>(n) != maturities.size()) throw DataError("decomposition csv: maturity count mismatch");
    if (d.estimator) out << "# estimator=" << to_string(*d.estimator) << '\n';
    out << "# degenerate=" << (d.degenerate ? "true" : "false") << '\n';
    out << "row";
    for (Eigen::Index k = 0; k < n; ++k) out << ",pc" << (k + 1);
    out << '\n';
    out << "eigenvalue";
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << num(d.eigenvalues(k));
    out << '\n';
    out << "cum_r2";
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << (d.degenerate ? std::string() : num(d.cum_r2(k)));
    out << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        out << "loading_" << num(maturities[i]);
        for (Eigen::Index k = 0; k < n; ++k) out << ',' << num(d.loadings(i, k));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Manifest ingest

namespace {

double frequency_to_dt(const json& f) {
    if (f.is_number()) {
        const double dt = f.get<double>();
        if (!(dt > 0.0)) throw DataError("manifest: numeric frequency must be a positive dt in years");
        return dt;
    }
    const auto s = f.get<std::string>();
    if (s == "daily") return 1.0 / 252.0;
    if (s == "weekly") return 1.0 / 52.0;
    if (s == "monthly") return 1.0 / 12.0;
    if (s == "quarterly") return 0.25;
    if (s == "annual") return 1.0;
    throw DataError("manifest: unknown frequency '" + s + "'");
}

}  // namespace

DatasetManifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw DataError("manifest: expected a JSON object");
    for (const auto& item : j.items()) {
        static const std::vector<std::string> allowed{"path",      "layout", "maturity_unit",
                                                      "rate_unit", "kind",   "frequency"};
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw DataError("manifest: unknown key '" + item.key() + "'");
        }
    }
    for (const char* key : {"path", "maturity_unit", "rate_unit", "kind", "frequency"}) {
        if (!j.contains(key)) throw DataError(std::string("manifest: '") + key + "' must be declared");
    }
    DatasetManifest m;
    try {
        if (j.contains("layout") && j.at("layout").get<std::string>() != "dates_in_rows") {
            throw DataError("manifest: only layout 'dates_in_rows' is supported");
        }
        m.path = j.at("path").get<std::string>();
        if (m.path.is_relative() && !base_dir.empty()) m.path = base_dir / m.path;
        const auto mu = j.at("maturity_unit").get<std::string>();
        if (mu == "months") {
            m.maturity_unit = MaturityUnit::months;
        } else if (mu == "years") {
            m.maturity_unit = MaturityUnit::years;
        } else {
            throw DataError("manifest: maturity_unit must be 'months' or 'years'");
        }
        const auto ru = j.at("rate_unit").get<std::string>();
        if (ru == "percent") {
            m.rate_unit = RateUnit::percent;
        } else if (ru == "decimal") {
            m.rate_unit = RateUnit::decimal;
        } else {
            throw DataError("manifest: rate_unit must be 'percent' or 'decimal'");
        }
        m.kind = curve_kind_from_string(j.at("kind").get<std::string>());
        m.dt = frequency_to_dt(j.at("frequency"));
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    auto in = open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

LabelledPanel ingest_panel(const DatasetManifest& manifest) {
    auto in = open_in(manifest.path);
    RawTable t = read_table(in, "dataset");
    if (const auto it = t.metadata.find("kind"); it != t.metadata.end()) {
        if (curve_kind_from_string(it->second) != manifest.kind) {
            throw DataError("dataset: file declares kind '" + it->second + "' but the manifest says '" +
                            std::string(to_string(manifest.kind)) + "'");
        }
    }
    std::vector<double> maturities = t.header;
    if (manifest.maturity_unit == MaturityUnit::months)
        for (double& x : maturities) x /= 12.0;
    for (std::size_t i = 1; i < maturities.size(); ++i) {
        if (!(maturities[i] > maturities[i - 1])) {
            throw DataError("dataset: maturities are not strictly increasing at column " + std::to_string(i + 2));
        }
    }
    Matrix values = to_matrix(t.rows);
    if (manifest.rate_unit == RateUnit::percent) values /= 100.0;
    return {CurvePanel(MaturityGrid(std::move(maturities)), std::move(values), manifest.kind, Transform::level,
                       manifest.dt),
            std::move(t.labels)};
}

// ---------------------------------------------------------------------------
// Empirical analysis

ExperimentReport empirical_factor_analysis(const CurvePanel& panel, const std::vector<EstimatorSpec>& estimators,
                                           double threshold) {
    if (panel.transform() != Transform::level) throw DataError("empirical analysis needs a level panel");
    if (panel.rows() < 17) throw DataError("empirical analysis needs at least 17 observations");
    SeriesPanels panels = [&] {
        switch (panel.kind()) {
            case CurveKind::forward: return SeriesPanels{panel, forward_to_yield(panel)};
            case CurveKind::yield: return SeriesPanels{yield_to_forward(panel), panel};
            case CurveKind::price: break;
        }
        throw DataError("empirical analysis needs a yield or forward panel, not prices");
    }();
    const std::vector<Series> series{Series::X, Series::Z, Series::dX, Series::dZ};
    const auto obs = observe_factors(panels, series, estimators, threshold);

    ExperimentReport r;
    r.mode = ExperimentMode::factors;
    r.code_version = std::string(code_version());
    json ests = json::array();
    for (const auto& e : estimators) ests.push_back(std::string(to_string(e.kind)));
    r.config = {{"source", "empirical"},
                {"kind", std::string(to_string(panel.kind()))},
                {"observations", panel.rows()},
                {"maturities", panel.grid().points()},
                {"dt", panel.dt()},
                {"estimators", ests},
                {"threshold", threshold}};
    r.factors = aggregate_factors({obs}, series, estimators, panel.grid().size(), threshold);
    return r;
}

}  // namespace fwdpca
