#include "shuber/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

namespace oracle = shuber::oracle;
using oracle::Method;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace {

Vector gaussian(std::mt19937_64& gen, Index m, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vector v(m);
    for (Index i = 0; i < m; ++i)
        v[i] = nd(gen);
    return v;
}

Vector sorted_weights(std::mt19937_64& gen, Index m) {
    Vector w = gaussian(gen, m).cwiseAbs();
    std::sort(w.data(), w.data() + m, std::greater<>());
    w.array() += 1e-2;
    return w;
}

double prox_objective(const Vector& x, const Vector& v, const Vector& w) {
    Vector a = x.cwiseAbs();
    std::sort(a.data(), a.data() + a.size(), std::greater<>());
    return 0.5 * (x - v).squaredNorm() + a.dot(w);
}

} // namespace

TEST(BruteProx, HandExample) {
    Vector v(2), w(2);
    v << 3.0, 1.0;
    w << 2.0, 1.0;
    const oracle::OracleResult r = oracle::brute_prox_slope(v, w);
    EXPECT_EQ(r.method, Method::EXHAUSTIVE_PATTERN);
    EXPECT_NEAR(r.argmin[0], 1.0, 1e-15);
    EXPECT_NEAR(r.argmin[1], 0.0, 1e-15);
    EXPECT_LE(r.certified_gap, 1e-10);
    EXPECT_NEAR(r.value, 0.5 * (4.0 + 1.0) + 2.0, 1e-14);
}

TEST(BruteProx, ZeroInput) {
    const Vector w = Vector::LinSpaced(4, 4.0, 1.0);
    const oracle::OracleResult r = oracle::brute_prox_slope(Vector::Zero(4), w);
    EXPECT_EQ(r.argmin, Vector::Zero(4));
    EXPECT_EQ(r.value, 0.0);
}

TEST(BruteProx, DimensionCaps) {
    const Vector w = Vector::LinSpaced(7, 7.0, 1.0);
    EXPECT_THROW(oracle::brute_prox_slope(Vector::Ones(7), w), std::invalid_argument);
    const Vector w51 = Vector::LinSpaced(51, 51.0, 1.0);
    EXPECT_THROW(oracle::brute_prox_slope(Vector::Ones(51), w51, Method::PROJECTED_SUBGRADIENT),
                 std::invalid_argument);
}

TEST(BruteProx, ExhaustiveIsNeverBeatenByPerturbation) {
    std::mt19937_64 gen(31);
    for (int t = 0; t < 200; ++t) {
        const Index m = 2 + t % 5;
        const Vector v = gaussian(gen, m, 2.0);
        const Vector w = sorted_weights(gen, m);
        const oracle::OracleResult r = oracle::brute_prox_slope(v, w);
        for (int k = 0; k < 20; ++k) {
            const Vector x = r.argmin + gaussian(gen, m, 1e-3);
            EXPECT_GE(prox_objective(x, v, w), r.value - 1e-13);
        }
    }
}

TEST(BruteProx, SubgradientAgreesWithExhaustiveWithinGap) {
    std::mt19937_64 gen(32);
    for (int t = 0; t < 30; ++t) {
        const Index m = 3 + t % 4;
        const Vector v = gaussian(gen, m, 2.0);
        const Vector w = sorted_weights(gen, m);
        const oracle::OracleResult ex = oracle::brute_prox_slope(v, w);
        const oracle::OracleResult sg = oracle::brute_prox_slope(v, w, Method::PROJECTED_SUBGRADIENT, 20000);
        EXPECT_EQ(sg.method, Method::PROJECTED_SUBGRADIENT);
        EXPECT_GE(sg.certified_gap, 0.0);
        EXPECT_LE(std::abs(sg.value - ex.value), sg.certified_gap + 1e-12);
        // strong convexity: ||x - x*||^2 / 2 <= gap
        EXPECT_LE((sg.argmin - ex.argmin).norm(), std::sqrt(2.0 * sg.certified_gap) + 1e-9);
    }
}

TEST(BruteInfconv, Examples) {
    Vector w(2), u(2);
    w << 1.5, 1.0;
    u << 1.0, 0.0;
    const oracle::OracleResult a = oracle::brute_infconv_q1(u, w, 1.0);
    EXPECT_NEAR(a.value, 1.0, 1e-12);
    EXPECT_LE(a.argmin.norm(), 1e-12);
    const oracle::OracleResult z = oracle::brute_infconv_q1(Vector::Zero(2), w, 0.3);
    EXPECT_EQ(z.value, 0.0);
    u << 3.0, -4.0;
    const oracle::OracleResult big = oracle::brute_infconv_q1(u, w, 1e6);
    EXPECT_NEAR(big.value, 5.0, 1e-9);
    EXPECT_THROW(oracle::brute_infconv_q1(Vector::Ones(3), Vector::Ones(3), 0.1), std::invalid_argument);
}

TEST(BruteInfconv, GridAndScanAgree) {
    std::mt19937_64 gen(33);
    for (int t = 0; t < 20; ++t) {
        const Vector u = gaussian(gen, 2, 2.0);
        const Vector w = sorted_weights(gen, 2);
        const double tau = 0.1 + 0.1 * (t % 5);
        const oracle::OracleResult g = oracle::brute_infconv_q1(u, w, tau, Method::GRID);
        const oracle::OracleResult s = oracle::brute_infconv_q1(u, w, tau, Method::SCAN);
        EXPECT_LE(std::abs(g.value - s.value), g.certified_gap + s.certified_gap + 1e-10);
    }
}

TEST(DenseLeastSquares, IdentityAndExactFit) {
    Vector y(3);
    y << 1.0, -2.0, 0.5;
    const oracle::OracleResult id = oracle::dense_least_squares(Matrix::Identity(3, 3), y);
    EXPECT_LE((id.argmin - y).norm(), 1e-14);
    std::mt19937_64 gen(34);
    const Matrix x = Eigen::Map<const Matrix>(gaussian(gen, 40).data(), 10, 4);
    const Vector b = gaussian(gen, 4);
    const oracle::OracleResult fit = oracle::dense_least_squares(x, x * b);
    EXPECT_LE((fit.argmin - b).norm(), 1e-12);
    EXPECT_LE(fit.value, 1e-24);
    Matrix rank_def = x;
    rank_def.col(3) = rank_def.col(0);
    EXPECT_THROW(oracle::dense_least_squares(rank_def, x * b), std::runtime_error);
}

TEST(LassoCoordinateDescent, OptimalityConditions) {
    std::mt19937_64 gen(35);
    const Matrix x = Eigen::Map<const Matrix>(gaussian(gen, 600).data(), 60, 10);
    Vector b = Vector::Zero(10);
    b.head(3) << 2.0, -1.0, 0.5;
    const Vector y = x * b + gaussian(gen, 60, 0.3);
    const double lambda = 0.2;
    const oracle::OracleResult r = oracle::lasso_coordinate_descent(x, y, lambda);
    const Vector grad = x.transpose() * (y - x * r.argmin) / 60.0;
    for (Index j = 0; j < 10; ++j) {
        if (r.argmin[j] != 0.0)
            EXPECT_NEAR(grad[j], std::copysign(lambda, r.argmin[j]), 1e-10);
        else
            EXPECT_LE(std::abs(grad[j]), lambda + 1e-10);
    }
}
