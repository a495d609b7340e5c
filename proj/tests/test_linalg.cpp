#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "fwdpca/errors.hpp"
#include "fwdpca/linalg.hpp"
#include "oracles.hpp"

using namespace fwdpca;

TEST_CASE("jacobi eigenvalues match Eigen's self-adjoint solver") {
    std::mt19937_64 gen(11);
    for (int n : {2, 5, 16, 32}) {
        const Matrix a = oracle::random_matrix(n, n, gen);
        const Matrix s = a + a.transpose();
        const SymmetricEigen je = jacobi_eigen(s);
        Vector mine = je.values;
        std::sort(mine.begin(), mine.end());
        const Vector ref = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues();
        CHECK((mine - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
        const Matrix& v = je.vectors;
        CHECK(oracle::max_abs(v.transpose() * v - Matrix::Identity(n, n)) < 1e-12);
        CHECK(oracle::max_abs(v * je.values.asDiagonal() * v.transpose() - s) < 1e-11 * ref.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("jacobi is deterministic and handles diagonal input") {
    std::mt19937_64 gen(12);
    const Matrix s = oracle::random_psd(10, 10, gen);
    const SymmetricEigen a = jacobi_eigen(s), b = jacobi_eigen(s);
    CHECK(a.values == b.values);
    CHECK(a.vectors == b.vectors);

    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 3, 1, 2;
    const SymmetricEigen e = jacobi_eigen(d);
    CHECK(e.sweeps <= 1);
    CHECK(e.values(0) == 3);
    CHECK(e.values(1) == 1);
    CHECK(e.values(2) == 2);
    CHECK_THROWS_AS(jacobi_eigen(Matrix::Zero(2, 3)), DataError);
}

TEST_CASE("symmetry helpers") {
    Matrix a(2, 2);
    a << 1, 2, 2.5, 4;
    CHECK(max_asymmetry(a) == doctest::Approx(0.5));
    const Matrix s = symmetrize(a);
    CHECK(s(0, 1) == doctest::Approx(2.25));
    CHECK(s(1, 0) == doctest::Approx(2.25));
}

TEST_CASE("clip_to_psd removes exactly the negative part") {
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 2.0, -0.5, 1.0;
    std::mt19937_64 gen(13);
    const Matrix q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(3, 3, gen)).householderQ();
    const Matrix a = q * d * q.transpose();
    const PsdProjection p = clip_to_psd(a);
    CHECK(p.clipped == doctest::Approx(0.5));
    Matrix dp = d;
    dp(1, 1) = 0.0;
    CHECK(oracle::max_abs(p.matrix - q * dp * q.transpose()) < 1e-13);

    const Matrix psd = oracle::random_psd(6, 3, gen);
    const PsdProjection same = clip_to_psd(psd);
    CHECK(oracle::max_abs(same.matrix - psd) < 1e-12 * oracle::max_abs(psd));
    CHECK(same.clipped < 1e-12 * psd.trace());
}

TEST_CASE("numerical rank uses a relative threshold") {
    std::mt19937_64 gen(14);
    for (int k = 1; k <= 5; ++k) CHECK(numerical_rank(oracle::random_psd(12, k, gen)) == static_cast<std::size_t>(k));
    CHECK(numerical_rank(1e-20 * oracle::random_psd(12, 3, gen)) == 3);
    CHECK(numerical_rank(Matrix::Zero(4, 4)) == 0);
}
