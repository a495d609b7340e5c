#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "fwdpca/errors.hpp"
#include "fwdpca/lrcov.hpp"
#include "oracles.hpp"

using namespace fwdpca;

namespace {

// Two-pass autocovariance with divisor T at every lag.
Matrix autocov_oracle(const Matrix& w, int j) {
    const int T = static_cast<int>(w.rows()), n = static_cast<int>(w.cols());
    std::vector<double> mean(n, 0.0);
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < n; ++k) mean[k] += w(t, k) / T;
    Matrix g = Matrix::Zero(n, n);
    for (int t = j; t < T; ++t)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) g(a, b) += (w(t, a) - mean[a]) * (w(t - j, b) - mean[b]);
    return g / T;
}

Matrix weighted_autocov_sum(const Matrix& w, const std::function<double(int)>& weight) {
    Matrix s = autocov_oracle(w, 0);
    for (int j = 1; j < w.rows(); ++j) {
        const double k = weight(j);
        if (k == 0.0) continue;
        const Matrix g = autocov_oracle(w, j);
        s += k * (g + g.transpose());
    }
    return s;
}

// Bartlett with bandwidth T written as a double sum over dates.
Matrix bartlett_double_sum(const Matrix& w) {
    const Matrix u = w.rowwise() - w.colwise().mean();
    const int T = static_cast<int>(u.rows());
    Matrix s = Matrix::Zero(u.cols(), u.cols());
    for (int a = 0; a < T; ++a)
        for (int b = 0; b < T; ++b) s += (1.0 - std::abs(a - b) / static_cast<double>(T)) * u.row(a).transpose() * u.row(b);
    return s / T;
}

Matrix ar1_panel(int T, int n, double rho, std::mt19937_64& gen) {
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix w(T, n);
    for (int k = 0; k < n; ++k) {
        double x = z(gen) / std::sqrt(1.0 - rho * rho);
        for (int t = 0; t < T; ++t) {
            x = rho * x + z(gen);
            w(t, k) = x;
        }
    }
    return w;
}

double rel(const Matrix& a, const Matrix& b) { return oracle::max_abs(a - b) / std::max(oracle::max_abs(b), 1e-300); }

}  // namespace

TEST_CASE("estimator names") {
    for (auto e : {Estimator::static_cov, Estimator::andrews_qs, Estimator::vk_bartlett, Estimator::mueller_ua})
        CHECK(estimator_from_string(to_string(e)) == e);
    CHECK_THROWS(estimator_from_string("newey_west"));
    CHECK(ua_variant_from_string("literal_residual") == UaVariant::literal_residual);
}

TEST_CASE("hand-computed two-date values") {
    Matrix w(2, 1);
    w << 1.0, 3.0;
    CHECK(static_cov(w).matrix(0, 0) == doctest::Approx(1.0));
    CHECK(autocovariance(w, 1)(0, 0) == doctest::Approx(-0.5));
    CHECK(vk_lrcm(w).matrix(0, 0) == doctest::Approx(0.5));
    CHECK(*vk_lrcm(w).bandwidth == 2.0);
}

TEST_CASE("constant panels give zero for every estimator") {
    const Matrix w = Matrix::Constant(40, 3, 0.07);
    for (auto kind : {Estimator::static_cov, Estimator::andrews_qs, Estimator::vk_bartlett, Estimator::mueller_ua}) {
        EstimatorSpec s;
        s.kind = kind;
        CHECK(oracle::max_abs(estimate(w, s).matrix) < 1e-30);
    }
    CHECK(andrews_bandwidth(w) == 0.0);
}

TEST_CASE("static covariance and autocovariances match the two-pass oracle") {
    std::mt19937_64 gen(1);
    const Matrix w = oracle::random_matrix(120, 5, gen).array() + 3.0;
    CHECK(rel(static_cov(w).matrix, autocov_oracle(w, 0)) < 1e-13);
    for (int j : {1, 2, 17, 119}) CHECK(rel(autocovariance(w, j), autocov_oracle(w, j)) < 1e-12);
}

TEST_CASE("VK agrees with the Bartlett double sum and the autocovariance sum") {
    std::mt19937_64 gen(2);
    for (int T : {3, 16, 97}) {
        const Matrix w = ar1_panel(T, 4, 0.6, gen);
        const Matrix lib = vk_lrcm(w).matrix;
        const Matrix dbl = bartlett_double_sum(w);
        const Matrix acs = weighted_autocov_sum(w, [T](int j) { return 1.0 - j / static_cast<double>(T); });
        CHECK(rel(lib, dbl) < 1e-12);
        CHECK(rel(lib, acs) < 1e-12);
        Eigen::VectorXd k(T);
        for (int j = 0; j < T; ++j) k[j] = 1.0 - j / static_cast<double>(T);
        CHECK(rel(kernel_weighted_sum(w, k), dbl) < 1e-12);
    }
}

TEST_CASE("quadratic-spectral kernel") {
    CHECK(qs_kernel(0.0) == 1.0);
    for (double x : {0.3, 1.0, 2.5, -0.7}) {
        const long double z = 6.0L * std::numbers::pi_v<long double> * x / 5.0L;
        const long double k = 25.0L / (12.0L * std::numbers::pi_v<long double> * std::numbers::pi_v<long double> * x * x) *
                              (std::sin(z) / z - std::cos(z));
        CHECK(qs_kernel(x) == doctest::Approx(static_cast<double>(k)).epsilon(1e-13));
    }
    // continuity across the series branch
    CHECK(std::abs(qs_kernel(2.6e-4) - qs_kernel(2.66e-4)) < 1e-8);
    // first zero where tan z = z
    CHECK(std::abs(qs_kernel(4.493409457909064 * 5.0 / (6.0 * std::numbers::pi))) < 1e-12);
}

TEST_CASE("Andrews plug-in bandwidth") {
    std::mt19937_64 gen(3);
    const Matrix w = ar1_panel(400, 3, 0.5, gen);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd c = w.col(k).array() - w.col(k).mean();
        const Eigen::VectorXd x = c.head(399), y = c.tail(399);
        const double r = x.dot(y) / x.dot(x);
        const double s2 = (y - r * x).squaredNorm() / 399.0;
        num += 4 * r * r * s2 * s2 / std::pow(1 - r, 8);
        den += s2 * s2 / std::pow(1 - r, 4);
    }
    CHECK(andrews_bandwidth(w) == doctest::Approx(1.3221 * std::pow(400.0 * num / den, 0.2)).epsilon(1e-12));

    // a constant column is skipped, a near-unit-root one is capped
    Matrix with_const(400, 2);
    with_const.col(0) = w.col(0);
    with_const.col(1).setConstant(1.0);
    Matrix single = w.col(0);
    CHECK(andrews_bandwidth(with_const) == doctest::Approx(andrews_bandwidth(single)).epsilon(1e-14));
    Matrix walk(400, 1);
    std::normal_distribution<double> z;
    double acc = 0;
    for (int t = 0; t < 400; ++t) walk(t, 0) = acc += z(gen);
    const double capped = 1.3221 * std::pow(400.0 * 4 * 0.97 * 0.97 / std::pow(0.03, 4), 0.2);
    CHECK(andrews_bandwidth(walk) == doctest::Approx(capped).epsilon(1e-12));
}

TEST_CASE("Andrews estimate equals the kernel-weighted autocovariance sum") {
    std::mt19937_64 gen(4);
    const Matrix w = ar1_panel(150, 3, 0.4, gen);
    const double b = andrews_bandwidth(w);
    const CovarianceEstimate e = andrews_lrcm(w);
    CHECK(*e.bandwidth == b);
    const Matrix oracle_sum = weighted_autocov_sum(w, [b](int j) { return qs_kernel(j / b); });
    CHECK(rel(e.matrix, oracle_sum) < 1e-12);
    const CovarianceEstimate fixed = andrews_lrcm(w, 7.5);
    CHECK(*fixed.bandwidth == 7.5);
    CHECK(rel(fixed.matrix, weighted_autocov_sum(w, [](int j) { return qs_kernel(j / 7.5); })) < 1e-12);
}

TEST_CASE("Andrews is close to the long-run variance on IID and AR(1) data") {
    std::mt19937_64 gen(5);
    const int reps = 300, T = 500;
    for (double rho : {0.0, 0.5}) {
        double sum = 0.0;
        for (int r = 0; r < reps; ++r) sum += andrews_lrcm(ar1_panel(T, 1, rho, gen)).matrix(0, 0);
        const double lrv = 1.0 / ((1 - rho) * (1 - rho));
        CHECK(sum / reps / lrv == doctest::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("VK mean on IID data is a third of the variance") {
    std::mt19937_64 gen(6);
    std::normal_distribution<double> z(0.0, 2.0);
    const int reps = 4000, T = 200;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        Matrix w(T, 1);
        for (int t = 0; t < T; ++t) w(t, 0) = z(gen);
        const double v = vk_lrcm(w).matrix(0, 0);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / reps, se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - 4.0 * (1.0 - 1.0 / (T * T)) / 3.0) < 3.0 * se);
}

TEST_CASE("cosine basis is orthonormal and orthogonal to constants") {
    for (int T : {8, 33, 250}) {
        const Matrix b = cosine_basis(T, 6);
        CHECK(oracle::max_abs(b.transpose() * b - Matrix::Identity(6, 6)) < 1e-12);
        CHECK(b.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
        CHECK(b(0, 0) == doctest::Approx(std::sqrt(2.0 / T) * std::cos(std::numbers::pi * 0.5 / T)));
    }
}

TEST_CASE("Mueller UA on IID data is a scaled chi-square over p") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> z(0.0, 1.5);
    const int reps = 20000, T = 64, p = 4;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        Matrix w(T, 1);
        for (int t = 0; t < T; ++t) w(t, 0) = z(gen);
        const double v = mueller_ua(w, p).matrix(0, 0);
        sum += v;
        sum2 += v * v;
    }
    const double s2 = 2.25;
    const double mean = sum / reps, var = sum2 / reps - mean * mean;
    CHECK(std::abs(mean - s2) < 3.5 * std::sqrt(s2 * s2 / 2.0 / reps));
    CHECK(var / (s2 * s2 / 2.0) == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("Mueller UA projection form and the literal residual form") {
    std::mt19937_64 gen(8);
    const Matrix w = ar1_panel(80, 4, 0.3, gen);
    const Matrix u = w.rowwise() - w.colwise().mean();
    Matrix direct = Matrix::Zero(4, 4);
    for (int l = 1; l <= 6; ++l) {
        Eigen::RowVectorXd lam = Eigen::RowVectorXd::Zero(4);
        for (int t = 1; t <= 80; ++t) lam += std::sqrt(2.0 / 80) * std::cos(l * std::numbers::pi * (t - 0.5) / 80) * u.row(t - 1);
        direct += lam.transpose() * lam / 6.0;
    }
    const CovarianceEstimate e = mueller_ua(w, 6);
    CHECK(*e.p == 6);
    CHECK(rel(e.matrix, direct) < 1e-12);
    CHECK(oracle::max_abs(mueller_ua(w, 6, UaVariant::literal_residual).matrix) < 1e-20);
}

TEST_CASE("estimators are translation invariant, quadratic in scale and PSD") {
    std::mt19937_64 gen(9);
    const Matrix w = ar1_panel(90, 6, 0.7, gen);
    for (auto kind : {Estimator::static_cov, Estimator::andrews_qs, Estimator::vk_bartlett, Estimator::mueller_ua}) {
        EstimatorSpec s;
        s.kind = kind;
        const Matrix v = estimate(w, s).matrix;
        CHECK(rel(estimate(w.array() + 5.0, s).matrix, v) < 1e-10);
        CHECK(rel(estimate(3.0 * w, s).matrix, 9.0 * v) < 1e-12);
        CHECK(oracle::max_abs(v - v.transpose()) == 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(v);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * es.eigenvalues().maxCoeff());
        // column permutation permutes the estimate
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
        perm.indices() << 3, 0, 5, 1, 4, 2;
        CHECK(rel(estimate(w * perm, s).matrix, perm.transpose() * v * perm) < 1e-12);
    }
}

TEST_CASE("estimator input errors") {
    Matrix w = Matrix::Ones(10, 2);
    CHECK_THROWS_AS(mueller_ua(w, 10), UsageError);
    CHECK_THROWS_AS(mueller_ua(w, 0), UsageError);
    CHECK_THROWS_AS(andrews_lrcm(w, 0.0), UsageError);
    CHECK_THROWS_AS(static_cov(Matrix::Ones(1, 2)), DataError);
    CHECK_THROWS_AS(andrews_lrcm(Matrix::Ones(7, 2)), DataError);
    w(3, 1) = std::nan("");
    CHECK_THROWS_AS(vk_lrcm(w), DataError);
    CHECK_THROWS_AS(kernel_weighted_sum(Matrix::Ones(5, 1), Eigen::VectorXd::Ones(4)), DataError);
}
