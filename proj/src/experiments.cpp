#include "fwdpca/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "fwdpca/errors.hpp"
#include "fwdpca/pca.hpp"
#include "fwdpca/rng.hpp"

#ifndef FWDPCA_VERSION
#define FWDPCA_VERSION "0.0.0"
#endif

namespace fwdpca {

using nlohmann::json;

std::string_view code_version() { return FWDPCA_VERSION; }

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(Dgp d) {
    switch (d) {
        case Dgp::gaussian_hjm: return "gaussian_hjm";
        case Dgp::cir3: return "cir3";
        case Dgp::g2pp: return "g2pp";
    }
    return "?";
}

std::string_view to_string(Series s) {
    switch (s) {
        case Series::X: return "X";
        case Series::Z: return "Z";
        case Series::dX: return "dX";
        case Series::dZ: return "dZ";
    }
    return "?";
}

std::string_view to_string(ExperimentMode m) { return m == ExperimentMode::factors ? "factors" : "pricing"; }

Dgp dgp_from_string(std::string_view text) {
    for (auto d : {Dgp::gaussian_hjm, Dgp::cir3, Dgp::g2pp})
        if (text == to_string(d)) return d;
    throw UsageError("unknown dgp '" + std::string(text) + "'");
}

Series series_from_string(std::string_view text) {
    for (auto s : {Series::X, Series::Z, Series::dX, Series::dZ})
        if (text == to_string(s)) return s;
    throw UsageError("unknown series '" + std::string(text) + "' (expected X, Z, dX or dZ)");
}

ExperimentMode mode_from_string(std::string_view text) {
    if (text == "factors") return ExperimentMode::factors;
    if (text == "pricing") return ExperimentMode::pricing;
    throw UsageError("unknown experiment mode '" + std::string(text) + "'");
}

namespace {

std::string_view to_string(PricingInput in) { return in == PricingInput::forward ? "forward" : "yield"; }

PricingInput pricing_input_from_string(std::string_view text) {
    if (text == "forward") return PricingInput::forward;
    if (text == "yield") return PricingInput::yield;
    throw UsageError("unknown pricing input '" + std::string(text) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::vector<PricingOption> PricingSpec::default_options() {
    return {{0.25, 0.45}, {0.25, 0.50}, {0.25, 0.55}, {0.25, 0.60}, {0.5, 0.48}, {0.5, 0.53},
            {0.5, 0.58},  {0.5, 0.63},  {1.0, 0.50},  {1.0, 0.55},  {1.0, 0.60}, {1.0, 0.65}};
}

std::vector<EstimatorSpec> ExperimentConfig::all_estimators(int p) {
    std::vector<EstimatorSpec> out(4);
    out[0].kind = Estimator::static_cov;
    out[1].kind = Estimator::andrews_qs;
    out[2].kind = Estimator::vk_bartlett;
    out[3].kind = Estimator::mueller_ua;
    out[3].p = p;
    return out;
}

void ExperimentConfig::validate() const {
    if (reps < 1) throw UsageError("config: reps must be at least 1");
    if (T < 16) throw UsageError("config: T must be at least 16");
    if (!(dt > 0.0)) throw UsageError("config: dt must be positive");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("config: threshold must lie in (0, 1]");
    if (grid.size() < 3) throw UsageError("config: the grid needs at least 3 maturities");
    if (estimators.empty()) throw UsageError("config: no estimators listed");
    std::set<Estimator> seen;
    for (const auto& e : estimators) {
        if (!seen.insert(e.kind).second) {
            throw UsageError("config: estimator '" + std::string(to_string(e.kind)) + "' listed twice");
        }
        if (e.kind == Estimator::mueller_ua && (e.p < 1 || static_cast<std::size_t>(e.p) >= T)) {
            throw UsageError("config: mueller_ua needs 1 <= p < T");
        }
        if (e.bandwidth && !(*e.bandwidth > 0.0)) throw UsageError("config: bandwidth must be positive");
    }
    if (mode == ExperimentMode::factors && series.empty()) throw UsageError("config: no series listed");
    noise.validate(grid.size());
    switch (dgp) {
        case Dgp::gaussian_hjm: hjm.validate(); break;
        case Dgp::cir3: cir.validate(); break;
        case Dgp::g2pp: g2pp.validate(); break;
    }
    if (mode == ExperimentMode::pricing) {
        if (dgp != Dgp::g2pp) throw UsageError("config: pricing mode requires dgp g2pp");
        if (!pricing) throw UsageError("config: pricing mode requires a pricing block");
        if (pricing->options.empty()) throw UsageError("config: pricing block lists no options");
        for (const auto& o : pricing->options) OptionSpec{o.expiry, pricing->maturity, o.strike}.validate();
        if (!(pricing->threshold > 0.0 && pricing->threshold <= 1.0)) {
            throw UsageError("config: pricing threshold must lie in (0, 1]");
        }
        if (pricing->fixed_m && (*pricing->fixed_m < 1 || *pricing->fixed_m > grid.size())) {
            throw UsageError("config: fixed_m must lie in [1, n]");
        }
    }
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* where) {
    if (!j.is_object()) throw UsageError(std::string("config: '") + where + "' must be an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw UsageError(std::string("config: unknown key '") + item.key() + "' in " + where);
        }
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

json function_to_json(const MaturityFunction& f) {
    json j{{"shape", std::string(to_string(f.shape()))}};
    switch (f.shape()) {
        case MaturityFunction::Shape::constant: j["level"] = f.scale(); break;
        case MaturityFunction::Shape::exponential:
        case MaturityFunction::Shape::hump:
            j["scale"] = f.scale();
            j["decay"] = f.decay();
            break;
        case MaturityFunction::Shape::sampled:
            j["maturities"] = f.maturities();
            j["values"] = f.values();
            break;
    }
    return j;
}

MaturityFunction function_from_json(const json& j) {
    check_keys(j, {"shape", "level", "scale", "decay", "maturities", "values"}, "maturity function");
    const auto shape = get_or<std::string>(j, "shape", "");
    if (shape == "constant") return MaturityFunction::constant(get_or(j, "level", 0.0));
    if (shape == "exponential") return MaturityFunction::exponential(get_or(j, "scale", 0.0), get_or(j, "decay", 0.0));
    if (shape == "hump") return MaturityFunction::hump(get_or(j, "scale", 0.0), get_or(j, "decay", 0.0));
    if (shape == "sampled") {
        return MaturityFunction::sampled(get_or(j, "maturities", std::vector<double>{}),
                                         get_or(j, "values", std::vector<double>{}));
    }
    throw UsageError("config: unknown maturity function shape '" + shape + "'");
}

std::array<double, 3> triple(const json& j, const char* key, std::array<double, 3> fallback) {
    auto v = get_or(j, key, std::vector<double>(fallback.begin(), fallback.end()));
    if (v.size() != 3) throw UsageError(std::string("config: cir.") + key + " needs 3 entries");
    return {v[0], v[1], v[2]};
}

json estimator_to_json(const EstimatorSpec& e) {
    json j{{"kind", std::string(to_string(e.kind))}};
    if (e.kind == Estimator::mueller_ua) {
        j["p"] = e.p;
        j["variant"] = std::string(to_string(e.ua_variant));
    }
    if (e.kind == Estimator::andrews_qs) j["bandwidth"] = e.bandwidth ? json(*e.bandwidth) : json(nullptr);
    return j;
}

EstimatorSpec estimator_from_json(const json& j) {
    if (j.is_string()) {
        EstimatorSpec e;
        e.kind = estimator_from_string(j.get<std::string>());
        return e;
    }
    check_keys(j, {"kind", "p", "variant", "bandwidth"}, "estimator");
    EstimatorSpec e;
    e.kind = estimator_from_string(get_or<std::string>(j, "kind", ""));
    e.p = get_or(j, "p", 4);
    e.ua_variant = ua_variant_from_string(get_or<std::string>(j, "variant", "projection"));
    if (j.contains("bandwidth") && !j.at("bandwidth").is_null()) e.bandwidth = j.at("bandwidth").get<double>();
    return e;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"mode", "dgp", "hjm", "cir", "g2pp", "noise", "series", "estimators", "T", "reps", "dt", "grid_months",
                "master_seed", "threshold", "workers", "pricing"},
               "config");
    ExperimentConfig c;
    try {
        c.mode = mode_from_string(get_or<std::string>(j, "mode", "factors"));
        c.dgp = dgp_from_string(get_or<std::string>(j, "dgp", "gaussian_hjm"));
        if (j.contains("hjm")) {
            const json& h = j.at("hjm");
            check_keys(h, {"factors", "initial_curve"}, "hjm");
            if (h.contains("factors")) {
                c.hjm.factors.clear();
                for (const auto& f : h.at("factors")) c.hjm.factors.push_back(function_from_json(f));
            }
            if (h.contains("initial_curve")) c.hjm.initial_curve = function_from_json(h.at("initial_curve"));
        }
        if (j.contains("cir")) {
            const json& r = j.at("cir");
            check_keys(r, {"kappa", "theta", "sigma", "y0"}, "cir");
            c.cir.kappa = triple(r, "kappa", c.cir.kappa);
            c.cir.theta = triple(r, "theta", c.cir.theta);
            c.cir.sigma = triple(r, "sigma", c.cir.sigma);
            c.cir.y0 = triple(r, "y0", r.contains("theta") ? c.cir.theta : c.cir.y0);
        }
        if (j.contains("g2pp")) {
            const json& g = j.at("g2pp");
            check_keys(g, {"param_set", "kappa1", "kappa2", "vol1", "vol2", "rho", "flat_rate"}, "g2pp");
            const auto set = get_or<std::string>(g, "param_set", "set1");
            if (set == "set1") {
                c.g2pp = G2ppParams::set1();
            } else if (set == "set2") {
                c.g2pp = G2ppParams::set2();
            } else {
                throw UsageError("config: unknown g2pp param_set '" + set + "'");
            }
            c.g2pp.kappa1 = get_or(g, "kappa1", c.g2pp.kappa1);
            c.g2pp.kappa2 = get_or(g, "kappa2", c.g2pp.kappa2);
            c.g2pp.vol1 = get_or(g, "vol1", c.g2pp.vol1);
            c.g2pp.vol2 = get_or(g, "vol2", c.g2pp.vol2);
            c.g2pp.rho = get_or(g, "rho", c.g2pp.rho);
            c.g2pp.flat_rate = get_or(g, "flat_rate", c.g2pp.flat_rate);
        }
        if (j.contains("noise")) {
            const json& n = j.at("noise");
            check_keys(n, {"kind", "variance", "units", "omit_count", "omission", "spline_end"}, "noise");
            c.noise.kind = noise_kind_from_string(get_or<std::string>(n, "kind", "none"));
            c.noise.variance = get_or(n, "variance", c.noise.variance);
            c.noise.units = variance_units_from_string(get_or(n, "units", std::string(to_string(c.noise.units))));
            c.noise.omit_count = get_or(n, "omit_count", c.noise.omit_count);
            c.noise.omission = omission_pattern_from_string(get_or(n, "omission", std::string(to_string(c.noise.omission))));
            c.noise.spline_end = spline_end_from_string(get_or<std::string>(n, "spline_end", "natural"));
        }
        if (j.contains("series")) {
            c.series.clear();
            for (const auto& s : j.at("series")) c.series.push_back(series_from_string(s.get<std::string>()));
        }
        if (j.contains("estimators")) {
            for (const auto& e : j.at("estimators")) c.estimators.push_back(estimator_from_json(e));
        } else {
            c.estimators = ExperimentConfig::all_estimators();
        }
        c.T = get_or(j, "T", c.T);
        c.reps = get_or(j, "reps", c.reps);
        c.dt = get_or(j, "dt", c.dt);
        if (j.contains("grid_months")) {
            const auto months = j.at("grid_months").get<std::vector<double>>();
            c.grid = MaturityGrid::from_months(months);
        }
        c.master_seed = get_or(j, "master_seed", c.master_seed);
        c.threshold = get_or(j, "threshold", c.threshold);
        c.workers = get_or(j, "workers", c.workers);
        if (j.contains("pricing") && !j.at("pricing").is_null()) {
            const json& p = j.at("pricing");
            check_keys(p, {"maturity", "options", "threshold", "fixed_m", "input", "vol_form"}, "pricing");
            PricingSpec ps;
            ps.maturity = get_or(p, "maturity", ps.maturity);
            if (p.contains("options")) {
                for (const auto& o : p.at("options")) {
                    check_keys(o, {"expiry", "strike"}, "pricing option");
                    ps.options.push_back({o.at("expiry").get<double>(), o.at("strike").get<double>()});
                }
            } else {
                ps.options = PricingSpec::default_options();
            }
            ps.threshold = get_or(p, "threshold", ps.threshold);
            if (p.contains("fixed_m") && !p.at("fixed_m").is_null()) ps.fixed_m = p.at("fixed_m").get<std::size_t>();
            ps.input = pricing_input_from_string(get_or<std::string>(p, "input", "forward"));
            ps.vol_form = vol_form_from_string(get_or<std::string>(p, "vol_form", "standard"));
            c.pricing = ps;
        }
        c.validate();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    } catch (const DataError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["mode"] = std::string(to_string(c.mode));
    j["dgp"] = std::string(to_string(c.dgp));
    switch (c.dgp) {
        case Dgp::gaussian_hjm: {
            json factors = json::array();
            for (const auto& f : c.hjm.factors) factors.push_back(function_to_json(f));
            j["hjm"] = {{"factors", factors}, {"initial_curve", function_to_json(c.hjm.initial_curve)}};
            break;
        }
        case Dgp::cir3:
            j["cir"] = {{"kappa", c.cir.kappa}, {"theta", c.cir.theta}, {"sigma", c.cir.sigma}, {"y0", c.cir.y0}};
            break;
        case Dgp::g2pp:
            j["g2pp"] = {{"kappa1", c.g2pp.kappa1}, {"kappa2", c.g2pp.kappa2}, {"vol1", c.g2pp.vol1},
                         {"vol2", c.g2pp.vol2},     {"rho", c.g2pp.rho},       {"flat_rate", c.g2pp.flat_rate}};
            break;
    }
    j["noise"] = {{"kind", std::string(to_string(c.noise.kind))},
                  {"variance", c.noise.variance},
                  {"units", std::string(to_string(c.noise.units))},
                  {"omit_count", c.noise.omit_count},
                  {"omission", std::string(to_string(c.noise.omission))},
                  {"spline_end", std::string(to_string(c.noise.spline_end))}};
    json series = json::array();
    for (auto s : c.series) series.push_back(std::string(to_string(s)));
    j["series"] = series;
    json estimators = json::array();
    for (const auto& e : c.estimators) estimators.push_back(estimator_to_json(e));
    j["estimators"] = estimators;
    j["T"] = c.T;
    j["reps"] = c.reps;
    j["dt"] = c.dt;
    std::vector<double> months;
    for (double x : c.grid.points()) months.push_back(x * 12.0);
    j["grid_months"] = months;
    j["master_seed"] = c.master_seed;
    j["threshold"] = c.threshold;
    j["workers"] = c.workers;
    if (c.pricing) {
        json options = json::array();
        for (const auto& o : c.pricing->options) options.push_back({{"expiry", o.expiry}, {"strike", o.strike}});
        j["pricing"] = {{"maturity", c.pricing->maturity},
                        {"options", options},
                        {"threshold", c.pricing->threshold},
                        {"fixed_m", c.pricing->fixed_m ? json(*c.pricing->fixed_m) : json(nullptr)},
                        {"input", std::string(to_string(c.pricing->input))},
                        {"vol_form", std::string(to_string(c.pricing->vol_form))}};
    }
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report helpers

double FactorCell::fraction(std::size_t k) const {
    if (reps == 0 || k >= histogram.size()) return 0.0;
    return static_cast<double>(histogram[k]) / static_cast<double>(reps);
}

const FactorCell* ExperimentReport::find(Series s, Estimator e) const {
    for (const auto& c : factors)
        if (c.series == s && c.estimator == e) return &c;
    return nullptr;
}

const PricingCell* ExperimentReport::find(double expiry, double strike, Estimator e) const {
    for (const auto& c : pricing)
        if (c.expiry == expiry && c.strike == strike && c.estimator == e) return &c;
    return nullptr;
}

json report_to_json(const ExperimentReport& r) {
    json j;
    j["mode"] = std::string(to_string(r.mode));
    j["code_version"] = r.code_version;
    j["config"] = r.config;
    json factors = json::array();
    for (const auto& c : r.factors) {
        factors.push_back({{"series", std::string(to_string(c.series))},
                           {"estimator", std::string(to_string(c.estimator))},
                           {"mean_cum_r2", c.mean_cum_r2},
                           {"mean_count", c.mean_count},
                           {"mean_curve_count", c.mean_curve_count},
                           {"histogram", c.histogram},
                           {"degenerate", c.degenerate},
                           {"reps", c.reps}});
    }
    j["factors"] = factors;
    json pricing = json::array();
    for (const auto& c : r.pricing) {
        pricing.push_back({{"expiry", c.expiry},
                           {"strike", c.strike},
                           {"estimator", std::string(to_string(c.estimator))},
                           {"analytic", c.analytic},
                           {"mse", c.mse},
                           {"bias", c.bias},
                           {"mse_se", c.mse_se},
                           {"nonpositive_variance", c.nonpositive_variance},
                           {"mean_factors", c.mean_factors}});
    }
    j["pricing"] = pricing;
    return j;
}

ExperimentReport report_from_json(const json& j) {
    ExperimentReport r;
    try {
        r.mode = mode_from_string(j.at("mode").get<std::string>());
        r.code_version = j.at("code_version").get<std::string>();
        r.config = j.at("config");
        for (const auto& c : j.at("factors")) {
            FactorCell f;
            f.series = series_from_string(c.at("series").get<std::string>());
            f.estimator = estimator_from_string(c.at("estimator").get<std::string>());
            f.mean_cum_r2 = c.at("mean_cum_r2").get<std::vector<double>>();
            f.mean_count = c.at("mean_count").get<double>();
            f.mean_curve_count = c.at("mean_curve_count").get<std::size_t>();
            f.histogram = c.at("histogram").get<std::vector<std::size_t>>();
            f.degenerate = c.at("degenerate").get<std::size_t>();
            f.reps = c.at("reps").get<std::size_t>();
            r.factors.push_back(std::move(f));
        }
        for (const auto& c : j.at("pricing")) {
            PricingCell p;
            p.expiry = c.at("expiry").get<double>();
            p.strike = c.at("strike").get<double>();
            p.estimator = estimator_from_string(c.at("estimator").get<std::string>());
            p.analytic = c.at("analytic").get<double>();
            p.mse = c.at("mse").get<double>();
            p.bias = c.at("bias").get<double>();
            p.mse_se = c.at("mse_se").get<double>();
            p.nonpositive_variance = c.at("nonpositive_variance").get<std::size_t>();
            p.mean_factors = c.at("mean_factors").get<double>();
            r.pricing.push_back(p);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Simulation

CurvePanel SeriesPanels::get(Series s) const {
    switch (s) {
        case Series::X: return X;
        case Series::Z: return Z;
        case Series::dX: return first_difference(X);
        case Series::dZ: return first_difference(Z);
    }
    throw UsageError("unknown series");
}

namespace {

struct CleanCurves {
    std::optional<CurvePanel> forward;
    std::optional<CurvePanel> yield;
    std::optional<CurvePanel> price;
    /// The curve the model produces first; used by "none" and "iid_gaussian".
    CurveKind native = CurveKind::yield;
};

CleanCurves simulate_clean(const ExperimentConfig& c, Rng& rng) {
    const std::size_t obs = c.T + 1;
    CleanCurves out;
    switch (c.dgp) {
        case Dgp::gaussian_hjm:
            out.forward = simulate_gaussian_hjm(c.hjm, obs, c.dt, c.grid, rng);
            out.native = CurveKind::forward;
            break;
        case Dgp::cir3: {
            Cir3Simulation sim = simulate_cir3(c.cir, obs, c.dt, c.grid, rng);
            out.forward = std::move(sim.forwards);
            out.yield = std::move(sim.yields);
            out.price = std::move(sim.prices);
            break;
        }
        case Dgp::g2pp: {
            G2ppSimulation sim = simulate_g2pp(c.g2pp, obs, c.dt, c.grid, rng);
            out.forward = std::move(sim.forwards);
            out.yield = std::move(sim.yields);
            out.price = std::move(sim.prices);
            break;
        }
    }
    if (!out.yield) out.yield = forward_to_yield(*out.forward);
    if (!out.price) out.price = yield_to_price(*out.yield);
    return out;
}

Matrix zeros_like(const CurvePanel& p) { return Matrix::Zero(p.rows(), p.cols()); }

}  // namespace

SeriesPanels simulate_observed(const ExperimentConfig& c, std::size_t rep) {
    Rng dgp_rng = seed_stream(c.master_seed, rep, StreamPurpose::dgp);
    Rng noise_rng = seed_stream(c.master_seed, rep, StreamPurpose::noise);
    Rng omit_rng = seed_stream(c.master_seed, rep, StreamPurpose::omission);
    const CleanCurves clean = simulate_clean(c, dgp_rng);
    const double v = c.noise.decimal_variance();

    ObservedCurves obs = [&]() -> ObservedCurves {
        const bool forward_native = clean.native == CurveKind::forward;
        switch (c.noise.kind) {
            case NoiseKind::none:
                return forward_native ? contaminate_forward(*clean.forward, zeros_like(*clean.forward))
                                      : contaminate_yield(*clean.yield, zeros_like(*clean.yield));
            case NoiseKind::iid_gaussian:
                return forward_native ? mme_forward(*clean.forward, v, noise_rng)
                                      : mme_yield(*clean.yield, v, noise_rng);
            case NoiseKind::mme_on_forward: return mme_forward(*clean.forward, v, noise_rng);
            case NoiseKind::mme_on_yield: return mme_yield(*clean.yield, v, noise_rng);
            case NoiseKind::spline_ies:
                return spline_ies(*clean.price, c.noise.omit_count, omit_rng, c.noise.omission, c.noise.spline_end)
                    .curves;
        }
        throw UsageError("unknown noise kind");
    }();
    return SeriesPanels{std::move(obs.forward), std::move(obs.yield)};
}

// ---------------------------------------------------------------------------
// Factor experiment

std::vector<FactorObservation> observe_factors(const SeriesPanels& panels, const std::vector<Series>& series,
                                               const std::vector<EstimatorSpec>& estimators, double threshold) {
    std::vector<FactorObservation> out;
    out.reserve(series.size() * estimators.size());
    for (Series s : series) {
        const CurvePanel panel = panels.get(s);
        for (const auto& spec : estimators) {
            const PcaDecomposition d = eigen_decompose(estimate(panel.values(), spec));
            FactorObservation o;
            if (d.degenerate) {
                o.degenerate = true;
            } else {
                o.cum_r2.assign(d.cum_r2.data(), d.cum_r2.data() + d.cum_r2.size());
                o.count = count_factors(d.cum_r2, threshold);
            }
            out.push_back(std::move(o));
        }
    }
    return out;
}

std::vector<FactorCell> aggregate_factors(const std::vector<std::vector<FactorObservation>>& per_rep,
                                          const std::vector<Series>& series,
                                          const std::vector<EstimatorSpec>& estimators, std::size_t n,
                                          double threshold) {
    std::vector<FactorCell> cells;
    std::size_t idx = 0;
    for (Series s : series) {
        for (const auto& spec : estimators) {
            FactorCell cell;
            cell.series = s;
            cell.estimator = spec.kind;
            cell.histogram.assign(n + 1, 0);
            cell.reps = per_rep.size();
            std::vector<double> sum(n, 0.0);
            double count_sum = 0.0;
            std::size_t used = 0;
            for (const auto& rep : per_rep) {
                const FactorObservation& o = rep.at(idx);
                if (o.degenerate) {
                    ++cell.degenerate;
                    continue;
                }
                for (std::size_t k = 0; k < n; ++k) sum[k] += o.cum_r2[k];
                count_sum += static_cast<double>(o.count);
                ++cell.histogram[o.count];
                ++used;
            }
            if (used > 0) {
                cell.mean_cum_r2.resize(n);
                for (std::size_t k = 0; k < n; ++k) cell.mean_cum_r2[k] = sum[k] / static_cast<double>(used);
                cell.mean_count = count_sum / static_cast<double>(used);
                Vector mean = Eigen::Map<const Vector>(cell.mean_cum_r2.data(), static_cast<Eigen::Index>(n));
                cell.mean_curve_count = count_factors(mean, threshold);
            }
            cells.push_back(std::move(cell));
            ++idx;
        }
    }
    return cells;
}

namespace {

[[noreturn]] void rethrow_with_replication(std::exception_ptr err, std::size_t rep) {
    const std::string prefix = "replication " + std::to_string(rep) + ": ";
    try {
        std::rethrow_exception(err);
    } catch (const UsageError& e) {
        throw UsageError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const std::exception& e) {
        throw NumericalError(prefix + e.what());
    }
}

/// Runs fn(rep) for every replication on `workers` threads. Results land in
/// replication order, so nothing downstream depends on scheduling.
template <class Result, class Fn>
std::vector<Result> run_replications(std::size_t reps, std::size_t workers, Fn fn) {
    std::vector<Result> results(reps);
    std::vector<std::exception_ptr> errors(reps);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, reps);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= reps) return;
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < reps; ++i)
        if (errors[i]) rethrow_with_replication(errors[i], i);
    return results;
}

ExperimentReport new_report(const ExperimentConfig& c) {
    ExperimentReport r;
    r.mode = c.mode;
    r.config = config_to_json(c);
    // scheduling only; reports must not depend on it
    r.config.erase("workers");
    r.code_version = std::string(code_version());
    return r;
}

}  // namespace

ExperimentReport run_factor_experiment(const ExperimentConfig& config) {
    config.validate();
    auto per_rep = run_replications<std::vector<FactorObservation>>(config.reps, config.workers, [&](std::size_t i) {
        return observe_factors(simulate_observed(config, i), config.series, config.estimators, config.threshold);
    });
    ExperimentReport r = new_report(config);
    r.factors = aggregate_factors(per_rep, config.series, config.estimators, config.grid.size(), config.threshold);
    return r;
}

// ---------------------------------------------------------------------------
// Pricing experiment

namespace {

struct PricingObservation {
    std::vector<double> error;  // (option, estimator), option-major
    std::vector<unsigned char> nonpositive;
    std::vector<double> factors;  // per estimator
};

}  // namespace

ExperimentReport run_pricing_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.mode != ExperimentMode::pricing || !config.pricing) {
        throw UsageError("run_pricing_experiment: config is not in pricing mode");
    }
    const PricingSpec& ps = *config.pricing;
    const std::size_t no = ps.options.size();
    const std::size_t ne = config.estimators.size();

    std::vector<double> analytic(no);
    for (std::size_t o = 0; o < no; ++o) {
        analytic[o] = g2pp_option_price(config.g2pp, OptionSpec{ps.options[o].expiry, ps.maturity, ps.options[o].strike});
    }
    const double p_maturity = g2pp_discount(config.g2pp, ps.maturity);

    auto per_rep = run_replications<PricingObservation>(config.reps, config.workers, [&](std::size_t i) {
        const SeriesPanels panels = simulate_observed(config, i);
        const CurvePanel diff = panels.get(ps.input == PricingInput::forward ? Series::dX : Series::dZ);
        PricingObservation obs;
        obs.error.assign(no * ne, 0.0);
        obs.nonpositive.assign(no * ne, 0);
        obs.factors.assign(ne, 0.0);
        for (std::size_t e = 0; e < ne; ++e) {
            const PcaDecomposition d = eigen_decompose(estimate(diff.values(), config.estimators[e]));
            std::optional<VolLoadings> vol;
            if (!d.degenerate) {
                const std::size_t m = ps.fixed_m ? *ps.fixed_m : count_factors(d.cum_r2, ps.threshold);
                obs.factors[e] = static_cast<double>(m);
                vol = extract_volatility(d, config.grid, config.dt, m);
            }
            for (std::size_t o = 0; o < no; ++o) {
                const double v = vol ? pca_integrated_variance(*vol, ps.options[o].expiry, ps.maturity) : 0.0;
                if (!(v > 0.0)) obs.nonpositive[o * ne + e] = 1;
                const double price = gaussian_bond_call(
                    p_maturity, g2pp_discount(config.g2pp, ps.options[o].expiry), ps.options[o].strike, v);
                obs.error[o * ne + e] = price - analytic[o];
            }
        }
        return obs;
    });

    ExperimentReport r = new_report(config);
    const double reps = static_cast<double>(config.reps);
    for (std::size_t o = 0; o < no; ++o) {
        for (std::size_t e = 0; e < ne; ++e) {
            PricingCell cell;
            cell.expiry = ps.options[o].expiry;
            cell.strike = ps.options[o].strike;
            cell.estimator = config.estimators[e].kind;
            cell.analytic = analytic[o];
            double s1 = 0.0, s2 = 0.0, s4 = 0.0, fac = 0.0;
            for (const auto& rep : per_rep) {
                const double err = rep.error[o * ne + e];
                s1 += err;
                s2 += err * err;
                s4 += err * err * err * err;
                cell.nonpositive_variance += rep.nonpositive[o * ne + e];
                fac += rep.factors[e];
            }
            cell.bias = s1 / reps;
            cell.mse = s2 / reps;
            const double var_sq = config.reps > 1 ? std::max(0.0, (s4 - reps * cell.mse * cell.mse) / (reps - 1.0)) : 0.0;
            cell.mse_se = std::sqrt(var_sq / reps);
            cell.mean_factors = fac / reps;
            r.pricing.push_back(cell);
        }
    }
    return r;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    return config.mode == ExperimentMode::factors ? run_factor_experiment(config) : run_pricing_experiment(config);
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

void finish_file(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> written;

    {
        const auto path = dir / "config.json";
        auto out = open_out(path);
        json echo{{"config", report.config}, {"code_version", report.code_version}};
        out << echo.dump(2) << '\n';
        finish_file(out, path);
        written.push_back(path);
    }
    {
        const auto path = dir / "summary.json";
        auto out = open_out(path);
        out << report_to_json(report).dump(2) << '\n';
        finish_file(out, path);
        written.push_back(path);
    }
    if (!report.factors.empty()) {
        const auto r2_path = dir / "factor_r2.csv";
        auto r2 = open_out(r2_path);
        r2 << "series,estimator,k,mean_cum_r2\n";
        for (const auto& c : report.factors) {
            for (std::size_t k = 0; k < c.mean_cum_r2.size(); ++k) {
                r2 << to_string(c.series) << ',' << to_string(c.estimator) << ',' << (k + 1) << ','
                   << num(c.mean_cum_r2[k]) << '\n';
            }
        }
        finish_file(r2, r2_path);
        written.push_back(r2_path);

        const auto counts_path = dir / "factor_counts.csv";
        auto counts = open_out(counts_path);
        const std::size_t n = report.factors.front().histogram.empty() ? 0 : report.factors.front().histogram.size() - 1;
        counts << "series,estimator,mean_count,mean_curve_count,degenerate,reps";
        for (std::size_t k = 1; k <= n; ++k) counts << ",reps_k" << k;
        counts << '\n';
        for (const auto& c : report.factors) {
            counts << to_string(c.series) << ',' << to_string(c.estimator) << ',' << num(c.mean_count) << ','
                   << c.mean_curve_count << ',' << c.degenerate << ',' << c.reps;
            for (std::size_t k = 1; k < c.histogram.size(); ++k) counts << ',' << c.histogram[k];
            counts << '\n';
        }
        finish_file(counts, counts_path);
        written.push_back(counts_path);
    }
    if (!report.pricing.empty()) {
        const auto long_path = dir / "pricing_cells.csv";
        auto cells = open_out(long_path);
        cells << "expiry,strike,estimator,analytic,mse,bias,mse_se,nonpositive_variance,mean_factors\n";
        for (const auto& c : report.pricing) {
            cells << num(c.expiry) << ',' << num(c.strike) << ',' << to_string(c.estimator) << ',' << num(c.analytic)
                  << ',' << num(c.mse) << ',' << num(c.bias) << ',' << num(c.mse_se) << ',' << c.nonpositive_variance
                  << ',' << num(c.mean_factors) << '\n';
        }
        finish_file(cells, long_path);
        written.push_back(long_path);

        // rows = estimators, columns = strikes, one block per expiry
        const auto table_path = dir / "pricing_table.csv";
        auto table = open_out(table_path);
        std::vector<double> expiries;
        std::vector<Estimator> ests;
        for (const auto& c : report.pricing) {
            if (std::find(expiries.begin(), expiries.end(), c.expiry) == expiries.end()) expiries.push_back(c.expiry);
            if (std::find(ests.begin(), ests.end(), c.estimator) == ests.end()) ests.push_back(c.estimator);
        }
        for (double t0 : expiries) {
            std::vector<double> strikes;
            for (const auto& c : report.pricing)
                if (c.expiry == t0 && std::find(strikes.begin(), strikes.end(), c.strike) == strikes.end())
                    strikes.push_back(c.strike);
            table << "T0=" << num(t0) << ",K";
            for (double k : strikes) table << ',' << num(k);
            table << '\n';
            for (Estimator e : ests) {
                table << "T0=" << num(t0) << ',' << to_string(e);
                for (double k : strikes) {
                    const PricingCell* c = report.find(t0, k, e);
                    table << ',' << (c ? num(c->mse) : std::string());
                }
                table << '\n';
            }
        }
        finish_file(table, table_path);
        written.push_back(table_path);
    }
    return written;
}

}  // namespace fwdpca
