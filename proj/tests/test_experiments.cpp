#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fwdpca/errors.hpp"
#include "fwdpca/experiments.hpp"
#include "fwdpca/pca.hpp"
#include "oracles.hpp"

using namespace fwdpca;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.T = 64;
    c.reps = 6;
    c.dt = 1.0 / 52.0;
    c.estimators = ExperimentConfig::all_estimators();
    c.workers = 1;
    return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fwdpca_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("enum names round trip") {
    for (auto d : {Dgp::gaussian_hjm, Dgp::cir3, Dgp::g2pp}) CHECK(dgp_from_string(to_string(d)) == d);
    for (auto s : {Series::X, Series::Z, Series::dX, Series::dZ}) CHECK(series_from_string(to_string(s)) == s);
    CHECK(mode_from_string("pricing") == ExperimentMode::pricing);
    CHECK_THROWS_AS(dgp_from_string("vasicek"), UsageError);
    CHECK_THROWS_AS(series_from_string("ddX"), UsageError);
}

TEST_CASE("default pricing options") {
    const auto o = PricingSpec::default_options();
    REQUIRE(o.size() == 12);
    CHECK(o[0].expiry == 0.25);
    CHECK(o[0].strike == 0.45);
    CHECK(o[5].expiry == 0.5);
    CHECK(o[5].strike == 0.53);
    CHECK(o[11].expiry == 1.0);
    CHECK(o[11].strike == 0.65);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c = small_config();
    c.mode = ExperimentMode::pricing;
    c.dgp = Dgp::g2pp;
    c.g2pp = G2ppParams::set2();
    c.noise.kind = NoiseKind::spline_ies;
    c.noise.omit_count = 3;
    c.noise.spline_end = SplineEnd::not_a_knot;
    c.estimators[3].p = 6;
    c.estimators[1].bandwidth = 12.0;
    c.pricing = PricingSpec{};
    c.pricing->options = PricingSpec::default_options();
    c.pricing->fixed_m = 2;
    c.pricing->vol_form = VolForm::paper;
    c.validate();
    const json j = config_to_json(c);
    const ExperimentConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.grid.points() == c.grid.points());
    CHECK(back.estimators[1].bandwidth == 12.0);
    CHECK(*back.pricing->fixed_m == 2);

    ExperimentConfig h = small_config();
    h.hjm.factors = {MaturityFunction::hump(0.05, 1.1), MaturityFunction::sampled({0.0, 40.0}, {0.01, 0.02})};
    CHECK(config_to_json(config_from_json(config_to_json(h))) == config_to_json(h));
    ExperimentConfig r = small_config();
    r.dgp = Dgp::cir3;
    CHECK(config_to_json(config_from_json(config_to_json(r))) == config_to_json(r));
}

TEST_CASE("config parsing defaults and errors") {
    const ExperimentConfig d = config_from_json(json::object());
    CHECK(d.T == 500);
    CHECK(d.reps == 200);
    CHECK(d.noise.units == VarianceUnits::decimal);
    CHECK(d.noise.omission == OmissionPattern::per_date);
    CHECK(d.grid.size() == 16);

    const ExperimentConfig e = config_from_json(json::parse(R"({"estimators": ["vk_bartlett", {"kind": "mueller_ua", "p": 8}],
        "grid_months": [3, 6, 12, 24], "noise": {"kind": "mme_on_yield", "variance": 1e-6}})"));
    REQUIRE(e.estimators.size() == 2);
    CHECK(e.estimators[1].p == 8);
    CHECK(e.grid[2] == doctest::Approx(1.0));
    CHECK(e.noise.kind == NoiseKind::mme_on_yield);
    CHECK(e.noise.omit_count == 4);

    const char* bad[] = {
        R"({"Tee": 5})",
        R"({"noise": {"kind": "none", "sigma": 1}})",
        R"({"hjm": {"factors": [{"shape": "constant", "lvl": 1}]}})",
        R"({"T": 10})",
        R"({"reps": 0})",
        R"({"threshold": 0})",
        R"({"threshold": 1.5})",
        R"({"estimators": []})",
        R"({"estimators": ["static_cov", "static_cov"]})",
        R"({"estimators": [{"kind": "mueller_ua", "p": 600}]})",
        R"({"estimators": [{"kind": "andrews_qs", "bandwidth": -1}]})",
        R"({"mode": "pricing", "dgp": "gaussian_hjm"})",
        R"({"mode": "pricing", "dgp": "g2pp", "pricing": {"fixed_m": 17}})",
        R"({"dgp": "cir3", "cir": {"kappa": [1, 2]}})",
        R"({"dgp": "g2pp", "g2pp": {"param_set": "set3"}})",
        R"({"T": "many"})",
        R"({"noise": {"kind": "spline_ies", "omit_count": 14}})",
        R"({"grid_months": [12, 6]})",
    };
    for (const char* text : bad) {
        CAPTURE(text);
        CHECK_THROWS_AS(config_from_json(json::parse(text)), UsageError);
    }
}

TEST_CASE("config file loading") {
    const auto dir = scratch_dir("load");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "c.json") << "{\n  // comment\n  \"T\": 100, \"reps\": 3\n}\n";
        std::ofstream(dir / "broken.json") << "{\"T\": ";
    }
    CHECK(load_config(dir / "c.json").T == 100);
    CHECK_THROWS_AS(load_config(dir / "broken.json"), UsageError);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), UsageError);
}

TEST_CASE("observed panels are deterministic and the noise uses its own stream") {
    ExperimentConfig clean = small_config();
    clean.master_seed = 99;
    ExperimentConfig noisy = clean;
    noisy.noise.kind = NoiseKind::mme_on_forward;
    noisy.noise.variance = 2e-7;

    const SeriesPanels a = simulate_observed(clean, 3);
    const SeriesPanels b = simulate_observed(noisy, 3);
    CHECK(a.X.rows() == 65);
    CHECK(oracle::max_abs(simulate_observed(clean, 3).X.values() - a.X.values()) == 0.0);
    CHECK(oracle::max_abs(simulate_observed(clean, 4).X.values() - a.X.values()) > 0.0);

    Rng noise = seed_stream(99, 3, StreamPurpose::noise);
    const Matrix eps = gaussian_noise(65, 16, 2e-7, noise);
    CHECK(oracle::max_abs(b.X.values() - a.X.values() - eps) < 1e-17);
    const Matrix J = discrete_averaging_operator(clean.grid).matrix;
    CHECK(oracle::max_abs(b.Z.values() - a.Z.values() - eps * J.transpose()) < 1e-16);

    const CurvePanel dX = a.get(Series::dX);
    CHECK(dX.rows() == 64);
    CHECK(oracle::max_abs(dX.values() - first_difference(a.X).values()) == 0.0);
    CHECK(a.get(Series::Z).kind() == CurveKind::yield);
}

TEST_CASE("replication results do not depend on the worker count") {
    ExperimentConfig c = small_config();
    c.noise.kind = NoiseKind::spline_ies;
    c.workers = 1;
    const ExperimentReport one = run_factor_experiment(c);
    c.workers = 3;
    const ExperimentReport three = run_factor_experiment(c);
    CHECK(report_to_json(one) != json());
    CHECK(one.factors == three.factors);
}

TEST_CASE("factor cells are well formed") {
    ExperimentConfig c = small_config();
    c.dgp = Dgp::cir3;
    const ExperimentReport r = run_experiment(c);
    CHECK(r.mode == ExperimentMode::factors);
    REQUIRE(r.factors.size() == 16);
    for (const auto& cell : r.factors) {
        CHECK(cell.reps == 6);
        CHECK(cell.degenerate == 0);
        REQUIRE(cell.mean_cum_r2.size() == 16);
        for (std::size_t k = 1; k < 16; ++k) CHECK(cell.mean_cum_r2[k] >= cell.mean_cum_r2[k - 1] - 1e-15);
        CHECK(cell.mean_cum_r2.back() == doctest::Approx(1.0));
        std::size_t total = 0;
        double mean = 0.0;
        for (std::size_t k = 1; k < cell.histogram.size(); ++k) {
            total += cell.histogram[k];
            mean += static_cast<double>(k * cell.histogram[k]);
        }
        CHECK(total == 6);
        CHECK(cell.mean_count == doctest::Approx(mean / 6.0));
        Vector curve = Eigen::Map<const Vector>(cell.mean_cum_r2.data(), 16);
        CHECK(cell.mean_curve_count == count_factors(curve, 0.99));
        CHECK(cell.fraction(cell.mean_curve_count) <= 1.0);
    }
    CHECK(r.find(Series::dZ, Estimator::vk_bartlett) != nullptr);
    CHECK(r.find(Series::dZ, Estimator::vk_bartlett)->series == Series::dZ);
}

TEST_CASE("degenerate replications are counted, not averaged") {
    const MaturityGrid g = MaturityGrid::treasury16();
    const CurvePanel flat(g, Matrix::Constant(30, 16, 0.05), CurveKind::forward, Transform::level, 1.0 / 52.0);
    const SeriesPanels p{flat, forward_to_yield(flat)};
    const std::vector<Series> s{Series::dX};
    const std::vector<EstimatorSpec> e = ExperimentConfig::all_estimators();
    const auto obs = observe_factors(p, s, e, 0.99);
    for (const auto& o : obs) CHECK(o.degenerate);

    ExperimentConfig c = small_config();
    c.reps = 1;
    const auto live = observe_factors(simulate_observed(c, 0), s, e, 0.99);
    const auto cells = aggregate_factors({obs, live, live}, s, e, 16, 0.99);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].degenerate == 1);
        CHECK(cells[i].reps == 3);
        CHECK(cells[i].mean_cum_r2 == live[i].cum_r2);
    }
}

TEST_CASE("static factor count on forward differences grows with the noise") {
    ExperimentConfig c = small_config();
    c.T = 200;
    c.reps = 4;
    c.series = {Series::dX};
    c.estimators = {EstimatorSpec{}};
    c.noise.kind = NoiseKind::mme_on_forward;
    double prev = 0.0;
    for (double v : {0.0, 1e-9, 1e-8, 1e-7, 1e-6}) {
        c.noise.variance = v;
        const double count = run_factor_experiment(c).factors[0].mean_count;
        CHECK(count >= prev);
        prev = count;
    }
    CHECK(prev >= 10.0);
}

TEST_CASE("a failing replication is reported with its index") {
    ExperimentConfig c = small_config();
    c.hjm.factors = {MaturityFunction::sampled({0.0, 5.0}, {0.01, 0.01})};
    c.workers = 2;
    try {
        run_factor_experiment(c);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).rfind("replication 0: ", 0) == 0);
    }
}

TEST_CASE("report JSON round trip and emitted files") {
    ExperimentConfig c = small_config();
    c.reps = 2;
    const ExperimentReport r = run_factor_experiment(c);
    CHECK(report_from_json(report_to_json(r)) == r);
    CHECK(r.code_version == std::string(code_version()));

    const auto dir = scratch_dir("emit");
    const auto files = emit_report(r, dir);
    CHECK(files.size() == 4);
    const json echo = json::parse(slurp(dir / "config.json"));
    CHECK(echo.at("code_version") == std::string(code_version()));
    json expected = config_to_json(c);
    expected.erase("workers");
    CHECK(echo.at("config") == expected);
    CHECK(config_to_json(config_from_json(echo.at("config"))).at("T") == 64);
    CHECK(report_from_json(json::parse(slurp(dir / "summary.json"))) == r);
    const auto r2 = lines(slurp(dir / "factor_r2.csv"));
    CHECK(r2.front() == "series,estimator,k,mean_cum_r2");
    CHECK(r2.size() == 1 + 16 * 16);
    const auto counts = lines(slurp(dir / "factor_counts.csv"));
    CHECK(counts.size() == 17);
    CHECK(counts.front().rfind("series,estimator,mean_count,mean_curve_count,degenerate,reps,reps_k1,", 0) == 0);
    CHECK(counts[1].rfind("X,static,", 0) == 0);
}

TEST_CASE("pricing experiment") {
    ExperimentConfig c = small_config();
    c.mode = ExperimentMode::pricing;
    c.dgp = Dgp::g2pp;
    c.T = 120;
    c.reps = 3;
    c.dt = 1.0 / 252.0;
    c.pricing = PricingSpec{};
    c.pricing->options = PricingSpec::default_options();
    const ExperimentReport r = run_experiment(c);
    REQUIRE(r.pricing.size() == 12 * 4);
    for (const auto& cell : r.pricing) {
        CHECK(cell.mse >= 0.0);
        CHECK(cell.mse >= cell.bias * cell.bias - 1e-18);
        CHECK(cell.analytic == doctest::Approx(g2pp_option_price(c.g2pp, {cell.expiry, 10.0, cell.strike})));
        CHECK(cell.mean_factors >= 1.0);
    }
    c.pricing->fixed_m = 2;
    const ExperimentReport fixed = run_experiment(c);
    for (const auto& cell : fixed.pricing) CHECK(cell.mean_factors == 2.0);

    CHECK(report_from_json(report_to_json(r)) == r);
    const auto dir = scratch_dir("pricing");
    emit_report(r, dir);
    const auto table = lines(slurp(dir / "pricing_table.csv"));
    REQUIRE(table.size() == 3 * 5);
    CHECK(table[0] == "T0=0.25,K,0.45000000000000001,0.5,0.55000000000000004,0.59999999999999998");
    CHECK(table[1].rfind("T0=0.25,static,", 0) == 0);
    CHECK(table[5].rfind("T0=0.5,K,", 0) == 0);
    CHECK(lines(slurp(dir / "pricing_cells.csv")).size() == 1 + 48);
}
