#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fwdpca/errors.hpp"
#include "fwdpca/experiments.hpp"
#include "fwdpca/io.hpp"
#include "fwdpca/lrcov.hpp"
#include "fwdpca/models.hpp"
#include "fwdpca/noise.hpp"
#include "fwdpca/pca.hpp"
#include "fwdpca/rng.hpp"

namespace fwdpca {
namespace {

struct GlobalOptions {
    std::uint64_t seed = 20240101;
    bool seed_given = false;
    std::string out_dir;
    std::string config;
    std::size_t workers = 0;
    bool workers_given = false;
};

/// Where a subcommand writes its main table: --out, else --out-dir/<name>, else stdout.
class Output {
public:
    Output(std::ostream& fallback, const std::string& out, const GlobalOptions& g, const std::string& name) {
        std::filesystem::path path;
        if (!out.empty()) {
            path = out;
        } else if (!g.out_dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(g.out_dir, ec);
            if (ec) throw DataError("cannot create output directory '" + g.out_dir + "': " + ec.message());
            path = std::filesystem::path(g.out_dir) / name;
        }
        if (path.empty()) {
            stream_ = &fallback;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw DataError("cannot write '" + path.string() + "'");
        stream_ = file_.get();
        path_ = path;
    }

    std::ostream& operator*() { return *stream_; }

    void close() {
        stream_->flush();
        if (!*stream_) throw DataError("failed writing '" + path_.string() + "'");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
    std::filesystem::path path_;
};

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ExperimentConfig base_config(const GlobalOptions& g) {
    ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (c.estimators.empty()) c.estimators = ExperimentConfig::all_estimators();
    if (g.seed_given || g.config.empty()) c.master_seed = g.seed;
    if (g.workers_given) c.workers = g.workers;
    return c;
}

std::vector<EstimatorSpec> estimator_specs(const std::vector<std::string>& names, int p,
                                           std::optional<double> bandwidth) {
    std::vector<EstimatorSpec> specs;
    if (names.empty()) {
        specs = ExperimentConfig::all_estimators(p);
    } else {
        for (const auto& n : names) {
            EstimatorSpec e;
            e.kind = estimator_from_string(n);
            e.p = p;
            specs.push_back(e);
        }
    }
    for (auto& e : specs)
        if (e.kind == Estimator::andrews_qs) e.bandwidth = bandwidth;
    return specs;
}

const std::vector<std::string> kEstimatorNames{"static",     "andrews_qs", "andrews", "vk_bartlett",
                                               "vk",         "mueller_ua", "mueller"};

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string dgp;
    std::optional<std::size_t> T;
    std::optional<double> dt;
    std::string curve;
    std::size_t rep = 0;
    std::string out;
};

void run_simulate(const SimulateArgs& a, const GlobalOptions& g, std::ostream& out) {
    ExperimentConfig c = base_config(g);
    if (!a.dgp.empty()) c.dgp = dgp_from_string(a.dgp);
    if (a.T) c.T = *a.T;
    if (a.dt) c.dt = *a.dt;
    c.noise = NoiseSpec{};
    c.mode = ExperimentMode::factors;
    c.pricing.reset();
    c.validate();
    const SeriesPanels p = simulate_observed(c, a.rep);
    std::string curve = a.curve;
    if (curve.empty()) curve = c.dgp == Dgp::gaussian_hjm ? "forward" : "yield";
    const CurvePanel panel = curve == "forward" ? p.X : curve == "yield" ? p.Z : yield_to_price(p.Z);
    Output o(out, a.out, g, curve + ".csv");
    write_panel_csv(*o, panel);
    o.close();
}

struct ContaminateArgs {
    std::string panel;
    std::string kind;
    double variance = 0.0035;
    std::string units = "decimal";
    std::size_t omit_count = 4;
    std::string omission = "per_date";
    std::string spline_end = "natural";
    std::string emit;
    std::size_t rep = 0;
    std::string out;
};

void run_contaminate(const ContaminateArgs& a, const GlobalOptions& g, std::ostream& out) {
    const LabelledPanel in = read_panel_csv(std::filesystem::path(a.panel));
    NoiseSpec spec;
    spec.kind = noise_kind_from_string(a.kind);
    spec.variance = a.variance;
    spec.units = variance_units_from_string(a.units);
    spec.omit_count = a.omit_count;
    spec.omission = omission_pattern_from_string(a.omission);
    spec.spline_end = spline_end_from_string(a.spline_end);
    spec.validate(in.panel.grid().size());
    Rng noise_rng = seed_stream(g.seed, a.rep, StreamPurpose::noise);
    Rng omit_rng = seed_stream(g.seed, a.rep, StreamPurpose::omission);

    auto require_kind = [&](CurveKind k) {
        if (in.panel.kind() != k) {
            throw DataError("noise '" + a.kind + "' needs a " + std::string(to_string(k)) + " panel, got " +
                            std::string(to_string(in.panel.kind())));
        }
    };
    std::optional<CurvePanel> result;
    std::optional<ObservedCurves> observed;
    switch (spec.kind) {
        case NoiseKind::none: result = in.panel; break;
        case NoiseKind::iid_gaussian: result = add_iid_gaussian(in.panel, spec.decimal_variance(), noise_rng); break;
        case NoiseKind::mme_on_forward:
            require_kind(CurveKind::forward);
            observed = mme_forward(in.panel, spec.decimal_variance(), noise_rng);
            break;
        case NoiseKind::mme_on_yield:
            require_kind(CurveKind::yield);
            observed = mme_yield(in.panel, spec.decimal_variance(), noise_rng);
            break;
        case NoiseKind::spline_ies:
            require_kind(CurveKind::price);
            observed = spline_ies(in.panel, spec.omit_count, omit_rng, spec.omission, spec.spline_end).curves;
            break;
    }
    if (observed) {
        std::string emit = a.emit;
        if (emit.empty()) emit = in.panel.kind() == CurveKind::forward ? "forward" : "yield";
        result = emit == "forward" ? observed->forward : observed->yield;
    } else if (!a.emit.empty() && a.emit != to_string(result->kind())) {
        throw UsageError("--emit " + a.emit + " is only available for mme and spline noise");
    }
    Output o(out, a.out, g, std::string(to_string(result->kind())) + "_contaminated.csv");
    write_panel_csv(*o, *result, in.labels);
    o.close();
}

struct CovArgs {
    std::string panel;
    std::string estimator;
    int p = 4;
    std::optional<double> bandwidth;
    std::string variant = "projection";
    bool difference = false;
    std::string out;
};

void run_cov(const CovArgs& a, const GlobalOptions& g, std::ostream& out) {
    CurvePanel panel = read_panel_csv(std::filesystem::path(a.panel)).panel;
    if (a.difference) panel = first_difference(panel);
    EstimatorSpec spec;
    spec.kind = estimator_from_string(a.estimator);
    spec.p = a.p;
    spec.bandwidth = a.bandwidth;
    spec.ua_variant = ua_variant_from_string(a.variant);
    const CovarianceEstimate cov = estimate(panel.values(), spec);
    LabelledMatrix m = covariance_to_matrix(cov, panel.grid());
    m.metadata["kind"] = std::string(to_string(panel.kind()));
    m.metadata["transform"] = std::string(to_string(panel.transform()));
    m.metadata["dt"] = num(panel.dt());
    Output o(out, a.out, g, "cov_" + std::string(to_string(spec.kind)) + ".csv");
    write_matrix_csv(*o, m);
    o.close();
}

struct PcaArgs {
    std::string matrix;
    double threshold = 0.99;
    std::string out;
};

void run_pca(const PcaArgs& a, const GlobalOptions& g, std::ostream& out) {
    const LabelledMatrix m = read_matrix_csv(std::filesystem::path(a.matrix));
    PcaDecomposition d = eigen_decompose(m.values);
    if (const auto it = m.metadata.find("estimator"); it != m.metadata.end()) d.estimator = estimator_from_string(it->second);
    Output o(out, a.out, g, "pca.csv");
    if (!d.degenerate) *o << "# factors=" << count_factors(d.cum_r2, a.threshold) << '\n';
    *o << "# threshold=" << num(a.threshold) << '\n';
    write_decomposition_csv(*o, d, m.maturities);
    o.close();
}

struct FactorsArgs {
    std::string panel;
    std::vector<std::string> estimators;
    double threshold = 0.99;
    int p = 4;
    std::string out;
};

void run_factors(const FactorsArgs& a, const GlobalOptions& g, std::ostream& out) {
    const CurvePanel panel = read_panel_csv(std::filesystem::path(a.panel)).panel;
    const ExperimentReport r = empirical_factor_analysis(panel, estimator_specs(a.estimators, a.p, std::nullopt),
                                                         a.threshold);
    Output o(out, a.out, g, "factors.csv");
    *o << "series,estimator,factors";
    for (std::size_t k = 1; k <= panel.grid().size(); ++k) *o << ",cum_r2_" << k;
    *o << '\n';
    for (const auto& c : r.factors) {
        *o << to_string(c.series) << ',' << to_string(c.estimator) << ',';
        if (c.degenerate > 0) {
            *o << "degenerate";
            for (std::size_t k = 0; k < panel.grid().size(); ++k) *o << ',';
        } else {
            *o << c.mean_curve_count;
            for (double v : c.mean_cum_r2) *o << ',' << num(v);
        }
        *o << '\n';
    }
    o.close();
    if (!g.out_dir.empty()) emit_report(r, g.out_dir);
}

struct PriceArgs {
    std::string param_set = "set1";
    double maturity = 10.0;
    std::vector<std::string> options;
    std::string out;
};

void run_price(const PriceArgs& a, const GlobalOptions& g, std::ostream& out) {
    G2ppParams params = a.param_set == "set2" ? G2ppParams::set2() : G2ppParams::set1();
    double maturity = a.maturity;
    std::vector<PricingOption> options;
    if (!g.config.empty()) {
        const ExperimentConfig c = load_config(g.config);
        params = c.g2pp;
        if (c.pricing) {
            maturity = c.pricing->maturity;
            options = c.pricing->options;
        }
    }
    if (!a.options.empty()) {
        options.clear();
        for (const auto& text : a.options) {
            const auto colon = text.find(':');
            try {
                if (colon == std::string::npos) throw std::invalid_argument(text);
                options.push_back({std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))});
            } catch (const std::logic_error&) {
                throw UsageError("--option expects EXPIRY:STRIKE, got '" + text + "'");
            }
        }
    }
    if (options.empty()) options = PricingSpec::default_options();
    params.validate();
    Output o(out, a.out, g, "prices.csv");
    *o << "expiry,maturity,strike,price\n";
    for (const auto& opt : options) {
        const OptionSpec spec{opt.expiry, maturity, opt.strike};
        spec.validate();
        *o << num(opt.expiry) << ',' << num(maturity) << ',' << num(opt.strike) << ','
           << num(g2pp_option_price(params, spec)) << '\n';
    }
    o.close();
}

struct ExperimentArgs {
    std::string config;
};

void run_experiment_cmd(const ExperimentArgs& a, GlobalOptions g, std::ostream& out) {
    if (!a.config.empty()) g.config = a.config;
    if (g.config.empty()) throw UsageError("experiment run needs a config file");
    ExperimentConfig c = load_config(g.config);
    if (g.seed_given) c.master_seed = g.seed;
    if (g.workers_given) c.workers = g.workers;
    const ExperimentReport r = run_experiment(c);
    const std::filesystem::path dir =
        g.out_dir.empty() ? std::filesystem::path("runs") / std::filesystem::path(g.config).stem()
                          : std::filesystem::path(g.out_dir);
    for (const auto& p : emit_report(r, dir)) out << p.string() << '\n';
}

struct IngestArgs {
    std::string manifest;
    std::string out;
};

void run_ingest(const IngestArgs& a, const GlobalOptions& g, std::ostream& out) {
    const LabelledPanel p = ingest_panel(load_manifest(a.manifest));
    Output o(out, a.out, g, std::filesystem::path(a.manifest).stem().string() + "_panel.csv");
    write_panel_csv(*o, p.panel, p.labels);
    o.close();
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Forward-curve PCA toolkit: simulate, contaminate, estimate long-run covariances, count factors, price.",
                 "fwdpca"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--config", g.config, "Experiment config file (JSON)");
    auto* workers_opt = app.add_option("--workers", g.workers, "Worker threads for experiments (0 = all cores)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a clean curve panel");
    simulate->add_option("--dgp", sim.dgp)->check(CLI::IsMember({"gaussian_hjm", "cir3", "g2pp"}));
    simulate->add_option("--T", sim.T, "Number of increments (the panel has T + 1 rows)");
    simulate->add_option("--dt", sim.dt);
    simulate->add_option("--curve", sim.curve)->check(CLI::IsMember({"forward", "yield", "price"}));
    simulate->add_option("--rep", sim.rep, "Replication index for the seed stream");
    simulate->add_option("--out", sim.out);

    ContaminateArgs con;
    auto* contaminate = app.add_subcommand("contaminate", "Add observation noise to a panel");
    contaminate->add_option("--panel", con.panel)->required();
    contaminate->add_option("--noise", con.kind)
        ->required()
        ->check(CLI::IsMember({"none", "iid_gaussian", "mme_on_forward", "mme_on_yield", "spline_ies"}));
    contaminate->add_option("--variance", con.variance)->capture_default_str();
    contaminate->add_option("--units", con.units)->check(CLI::IsMember({"percent", "decimal"}))->capture_default_str();
    contaminate->add_option("--omit-count", con.omit_count)->capture_default_str();
    contaminate->add_option("--omission", con.omission)
        ->check(CLI::IsMember({"per_replication", "per_date"}))
        ->capture_default_str();
    contaminate->add_option("--spline-end", con.spline_end)
        ->check(CLI::IsMember({"natural", "not_a_knot"}))
        ->capture_default_str();
    contaminate->add_option("--emit", con.emit, "Observed curve to write for mme and spline noise")
        ->check(CLI::IsMember({"forward", "yield"}));
    contaminate->add_option("--rep", con.rep);
    contaminate->add_option("--out", con.out);

    CovArgs cov;
    auto* cov_cmd = app.add_subcommand("cov", "Estimate a covariance or long-run covariance matrix");
    cov_cmd->add_option("--panel", cov.panel)->required();
    cov_cmd->add_option("--estimator", cov.estimator)->required()->check(CLI::IsMember(kEstimatorNames));
    cov_cmd->add_option("--p", cov.p, "Cosine count for mueller_ua")->capture_default_str();
    cov_cmd->add_option("--bandwidth", cov.bandwidth, "Andrews bandwidth override");
    cov_cmd->add_option("--variant", cov.variant)
        ->check(CLI::IsMember({"projection", "literal_residual"}))
        ->capture_default_str();
    cov_cmd->add_flag("--difference", cov.difference, "First-difference the panel before estimating");
    cov_cmd->add_option("--out", cov.out);

    PcaArgs pca;
    auto* pca_cmd = app.add_subcommand("pca", "Eigendecompose a covariance matrix CSV");
    pca_cmd->add_option("--matrix", pca.matrix)->required();
    pca_cmd->add_option("--threshold", pca.threshold)->capture_default_str();
    pca_cmd->add_option("--out", pca.out);

    FactorsArgs fac;
    auto* factors = app.add_subcommand("factors", "Factor counts of a level panel on X, Z, dX and dZ");
    factors->add_option("--panel", fac.panel)->required();
    factors->add_option("--estimator", fac.estimators, "Repeatable; default all four")
        ->check(CLI::IsMember(kEstimatorNames));
    factors->add_option("--threshold", fac.threshold)->capture_default_str();
    factors->add_option("--p", fac.p)->capture_default_str();
    factors->add_option("--out", fac.out);

    PriceArgs pr;
    auto* price = app.add_subcommand("price", "Analytic g2++ zero-coupon bond call prices");
    price->add_option("--param-set", pr.param_set)->check(CLI::IsMember({"set1", "set2"}))->capture_default_str();
    price->add_option("--maturity", pr.maturity, "Bond maturity T")->capture_default_str();
    price->add_option("--option", pr.options, "EXPIRY:STRIKE, repeatable");
    price->add_option("--out", pr.out);

    ExperimentArgs ex;
    auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments");
    experiment->require_subcommand(1);
    auto* run = experiment->add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", ex.config, "Config file (JSON)");

    IngestArgs ing;
    auto* ingest = app.add_subcommand("ingest", "Normalize a dataset described by a manifest");
    ingest->add_option("manifest", ing.manifest)->required();
    ingest->add_option("--out", ing.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string message = e.what();
        if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
            message = "unknown subcommand '" + std::string(argv[1]) + "'";
        }
        err << "error[usage]: " << message << '\n' << app.help();
        return 1;
    }
    g.seed_given = seed_opt->count() > 0;
    g.workers_given = workers_opt->count() > 0;

    try {
        if (simulate->parsed()) run_simulate(sim, g, out);
        if (contaminate->parsed()) run_contaminate(con, g, out);
        if (cov_cmd->parsed()) run_cov(cov, g, out);
        if (pca_cmd->parsed()) run_pca(pca, g, out);
        if (factors->parsed()) run_factors(fac, g, out);
        if (price->parsed()) run_price(pr, g, out);
        if (run->parsed()) run_experiment_cmd(ex, g, out);
        if (ingest->parsed()) run_ingest(ing, g, out);
    } catch (const Error& e) {
        err << "error[" << e.category() << "]: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error[internal]: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

}  // namespace fwdpca
