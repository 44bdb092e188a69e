#include "shuber/subdifferential.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace shuber;

namespace {

Vector gaussian(std::mt19937_64& gen, Index m, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vector v(m);
    for (Index i = 0; i < m; ++i)
        v[i] = nd(gen);
    return v;
}

} // namespace

TEST(SlopeSubdiff, ProxResidualIsMember) {
    // x = prox(v) iff v - x lies in d||x||_w.
    std::mt19937_64 gen(21);
    const WeightSequence w = WeightSequence::logarithmic(15);
    for (int t = 0; t < 300; ++t) {
        const Vector v = gaussian(gen, 15, 3.0);
        const Vector x = prox_sorted_l1(v, w);
        EXPECT_LE(slope_subdiff_distance(x, v - x, w.values()), 1e-12);
    }
}

TEST(SlopeSubdiff, ScalarCases) {
    Vector w(1);
    w << 2.0;
    Vector x(1), g(1);
    x << 1.0;
    g << 3.5;
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), 1.5, 1e-15);
    x << -1.0;
    g << -2.0;
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), 0.0, 1e-15);
    x << 0.0;
    g << 1.9;
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), 0.0, 1e-15);
    g << -2.5;
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), 0.5, 1e-15);
}

TEST(SlopeSubdiff, TiedClusterUsesPermutohedron) {
    // x = (1, 1), w = (2, 1): the subdifferential is the segment between
    // (2, 1) and (1, 2).
    Vector w(2), x(2), g(2);
    w << 2.0, 1.0;
    x << 1.0, 1.0;
    g << 1.5, 1.5;
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), 0.0, 1e-15);
    g << 3.0, 0.0;
    // nearest point (2, 1) at distance sqrt(2)
    EXPECT_NEAR(slope_subdiff_distance(x, g, w), std::sqrt(2.0), 1e-14);
}

TEST(SlopeSubdiff, OneLipschitzInG) {
    std::mt19937_64 gen(22);
    const WeightSequence w = WeightSequence::logarithmic(10);
    for (int t = 0; t < 200; ++t) {
        const Vector v = gaussian(gen, 10, 3.0);
        const Vector x = prox_sorted_l1(v, w);
        const Vector delta = gaussian(gen, 10, 0.3);
        EXPECT_LE(slope_subdiff_distance(x, v - x + delta, w.values()), delta.norm() + 1e-12);
    }
}

TEST(L1Subdiff, Intervals) {
    Vector x(3), g(3);
    x << 1.0, 0.0, -2.0;
    g << 0.5, 0.2, -0.5;
    EXPECT_NEAR(l1_subdiff_distance(x, g, 0.5), 0.0, 1e-15);
    g << 0.0, 0.9, 0.0;
    EXPECT_NEAR(l1_subdiff_distance(x, g, 0.5), std::sqrt(0.25 + 0.16 + 0.25), 1e-15);
}

TEST(NuclearSubdiff, MembersAndDistances) {
    std::mt19937_64 gen(23);
    const Matrix u = Eigen::HouseholderQR<Matrix>(Eigen::Map<const Matrix>(gaussian(gen, 36).data(), 6, 6))
                         .householderQ();
    const Matrix v = Eigen::HouseholderQR<Matrix>(Eigen::Map<const Matrix>(gaussian(gen, 25).data(), 5, 5))
                         .householderQ();
    Vector s = Vector::Zero(5);
    s << 3.0, 1.0, 0.0, 0.0, 0.0;
    const Matrix b = u.leftCols(5) * s.asDiagonal() * v.transpose();
    const Matrix anchor = u.leftCols(2) * v.leftCols(2).transpose();
    const double lambda = 0.7;
    // lambda (U V^T + W) with ||W||_op <= 1 on the complement
    const Matrix w = 0.9 * u.col(3) * v.col(4).transpose();
    EXPECT_LE(nuclear_subdiff_distance(b, lambda * (anchor + w), lambda), 1e-12);
    // 2 lambda U V^T is at distance lambda ||U V^T||_F = lambda sqrt(2)
    EXPECT_NEAR(nuclear_subdiff_distance(b, 2.0 * lambda * anchor, lambda), lambda * std::sqrt(2.0), 1e-12);
    // complement part of operator norm 1.5 lambda sticks out by 0.5 lambda
    const Matrix big = lambda * (anchor + 1.5 * u.col(2) * v.col(3).transpose());
    EXPECT_NEAR(nuclear_subdiff_distance(b, big, lambda), 0.5 * lambda, 1e-12);
}

TEST(NuclearSubdiff, ZeroMatrixIsOperatorBall) {
    std::mt19937_64 gen(24);
    const Matrix g = Eigen::Map<const Matrix>(gaussian(gen, 12).data(), 4, 3);
    const double op = matrix_norm(g, NormTag::OPERATOR);
    EXPECT_LE(nuclear_subdiff_distance(Matrix::Zero(4, 3), g, op * 1.01), 1e-12);
    EXPECT_GT(nuclear_subdiff_distance(Matrix::Zero(4, 3), g, op * 0.5), 0.0);
}

TEST(NuclearBoxSubdiff, NormalConeAbsorbsActiveEntries) {
    // b = a at one entry; g = lambda d||b|| + c e_ij with c > 0 is a member,
    // with c < 0 it is not.
    Matrix b = Matrix::Zero(3, 3);
    b(0, 0) = 0.5;
    const double lambda = 0.2, a = 0.5;
    Matrix g = Matrix::Zero(3, 3);
    g(0, 0) = lambda + 3.0;
    EXPECT_LE(nuclear_box_subdiff_distance(b, g, lambda, a), 1e-10);
    EXPECT_NEAR(nuclear_subdiff_distance(b, g, lambda), 3.0, 1e-12);
    g(0, 0) = lambda - 1.0;
    EXPECT_NEAR(nuclear_box_subdiff_distance(b, g, lambda, a), 1.0, 1e-8);
    // inactive box falls back to the plain distance
    EXPECT_NEAR(nuclear_box_subdiff_distance(b, g, lambda, 10.0), nuclear_subdiff_distance(b, g, lambda), 1e-15);
}
