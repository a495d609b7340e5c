#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/cli.hpp"
#include "fwdpca/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"fwdpca"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = fwdpca::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fwdpca_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    const Result none = run({});
    CHECK(none.code == 1);
    CHECK(none.err.rfind("error[usage]:", 0) == 0);
    const Result unknown = run({"frobnicate"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
    CHECK(run({"cov", "--estimator", "static"}).code == 1);
    CHECK(run({"cov", "--panel", "x.csv", "--estimator", "newey_west"}).code == 1);
    CHECK(run({"price", "--option", "half:0.5"}).code == 1);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("missing or malformed inputs exit with code 2") {
    const auto dir = scratch_dir("data");
    const Result missing = run({"factors", "--panel", (dir / "absent.csv").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.rfind("error[data]:", 0) == 0);
    std::ofstream(dir / "ragged.csv") << "# kind=yield\n# transform=level\n# dt=0.1\ndate,1,2\na,1,2\nb,3\n";
    const Result ragged = run({"factors", "--panel", (dir / "ragged.csv").string()});
    CHECK(ragged.code == 2);
    CHECK(ragged.err.find("row 2") != std::string::npos);
}

TEST_CASE("simulate is byte-deterministic for a seed") {
    const auto dir = scratch_dir("simulate");
    const auto a = dir / "a.csv", b = dir / "b.csv", c = dir / "c.csv";
    REQUIRE(run({"--seed", "7", "simulate", "--dgp", "cir3", "--T", "40", "--out", a.string()}).code == 0);
    REQUIRE(run({"--seed", "7", "simulate", "--dgp", "cir3", "--T", "40", "--out", b.string()}).code == 0);
    REQUIRE(run({"--seed", "8", "simulate", "--dgp", "cir3", "--T", "40", "--out", c.string()}).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));
    const auto p = fwdpca::read_panel_csv(a);
    CHECK(p.panel.rows() == 41);
    CHECK(p.panel.grid().size() == 16);
}

TEST_CASE("simulate, contaminate, cov, pca and factors chain together") {
    const auto dir = scratch_dir("chain");
    const auto fwd = dir / "fwd.csv", noisy = dir / "noisy.csv", cov = dir / "cov.csv", pca = dir / "pca.csv";
    REQUIRE(run({"simulate", "--dgp", "gaussian_hjm", "--T", "120", "--dt", "0.0192307692", "--curve", "forward",
                 "--out", fwd.string()})
                .code == 0);
    const Result con = run({"contaminate", "--panel", fwd.string(), "--noise", "mme_on_forward", "--variance", "1e-7",
                            "--emit", "forward", "--out", noisy.string()});
    REQUIRE(con.code == 0);
    const Result c = run({"cov", "--panel", noisy.string(), "--estimator", "vk_bartlett", "--difference", "--out",
                          cov.string()});
    REQUIRE(c.code == 0);
    CHECK(fwdpca::read_matrix_csv(cov).metadata.at("estimator") == "vk_bartlett");
    const Result e = run({"pca", "--matrix", cov.string(), "--out", pca.string()});
    REQUIRE(e.code == 0);
    const std::string text = slurp(pca);
    CHECK(text.find("# factors=") != std::string::npos);
    CHECK(text.find("eigenvalue,") != std::string::npos);

    const Result f = run({"factors", "--panel", noisy.string(), "--estimator", "static", "--estimator", "mueller_ua"});
    REQUIRE(f.code == 0);
    std::istringstream lines(f.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0].rfind("series,estimator,factors,cum_r2_1,", 0) == 0);
    CHECK(rows[1].rfind("X,static,", 0) == 0);
    CHECK(rows[8].rfind("dZ,mueller_ua,", 0) == 0);
}

TEST_CASE("price prints analytic option values") {
    const Result r = run({"price", "--param-set", "set1", "--option", "0.5:0.53", "--option", "1:0.6"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header == "expiry,maturity,strike,price");
    CHECK(first.rfind("0.5,10,", 0) == 0);
    const double price = std::stod(first.substr(first.rfind(',') + 1));
    CHECK(price > 0.0);
    CHECK(price < 0.1);
}

TEST_CASE("experiment run writes the report files") {
    const auto dir = scratch_dir("experiment");
    std::ofstream(dir / "small.json") << R"({"T": 40, "reps": 2, "dt": 0.0192307692, "estimators": ["static", "vk_bartlett"]})";
    const auto out = dir / "out";
    const Result r = run({"--out-dir", out.string(), "--workers", "2", "experiment", "run", (dir / "small.json").string()});
    CHECK(r.code == 0);
    for (const char* f : {"config.json", "summary.json", "factor_r2.csv", "factor_counts.csv"}) {
        CAPTURE(f);
        CHECK(fs::exists(out / f));
        CHECK(r.out.find(f) != std::string::npos);
    }
    std::ofstream(dir / "bad.json") << R"({"T": 40, "unknown": 1})";
    CHECK(run({"--out-dir", out.string(), "experiment", "run", (dir / "bad.json").string()}).code == 1);
}

TEST_CASE("ingest normalizes a dataset") {
    const auto dir = scratch_dir("ingest");
    std::ofstream(dir / "raw.csv") << "m,12,24,60\n2001-01,5.0,5.2,5.5\n2001-02,4.9,5.1,5.4\n";
    std::ofstream(dir / "m.json") << R"({"path": "raw.csv", "maturity_unit": "months", "rate_unit": "percent",
        "kind": "yield", "frequency": "monthly"})";
    const auto out = dir / "panel.csv";
    REQUIRE(run({"ingest", (dir / "m.json").string(), "--out", out.string()}).code == 0);
    const auto p = fwdpca::read_panel_csv(out);
    CHECK(p.labels[0] == "2001-01");
    CHECK(p.panel.grid()[2] == doctest::Approx(5.0));
    CHECK(p.panel.values()(1, 2) == doctest::Approx(0.054));
}
