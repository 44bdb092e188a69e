#pragma once

// Distances from a vector/matrix to penalty subdifferentials, for first-order
// optimality checks.

#include "shuber/prox.hpp"

namespace shuber {

namespace detail {

/// Squared distance from z to the permutohedron spanned by w (w
/// nonincreasing): the points whose sorted partial sums are dominated by
/// those of w with equal totals.
inline double permutohedron_sq_distance(Vector z, const Vector& w) {
    std::sort(z.data(), z.data() + z.size(), std::greater<>());
    // nonincreasing isotonic fit of z - w; the residual of the projection
    // equals the fitted values.
    struct Block {
        double sum;
        Index len;
    };
    std::vector<Block> stack;
    for (Index k = 0; k < z.size(); ++k) {
        stack.push_back({z[k] - w[k], 1});
        while (stack.size() > 1) {
            const Block& top = stack.back();
            const Block& below = stack[stack.size() - 2];
            if (below.sum / static_cast<double>(below.len) > top.sum / static_cast<double>(top.len))
                break;
            Block merged{below.sum + top.sum, below.len + top.len};
            stack.pop_back();
            stack.back() = merged;
        }
    }
    double d2 = 0.0;
    for (const Block& b : stack) {
        const double mean = b.sum / static_cast<double>(b.len);
        d2 += static_cast<double>(b.len) * mean * mean;
    }
    return d2;
}

} // namespace detail

/// Magnitudes within this (relative) tolerance are treated as tied or zero.
inline constexpr double kClusterTolerance = 1e-12;

/// dist(g, d||x||_w) where ||x||_w = sum_i w_i |x|_(i).
///
/// The subdifferential splits over clusters of equal |x_i|: nonzero clusters
/// contribute a signed permutohedron of their weight block, the zero cluster
/// the dual unit ball of the trailing weights.
inline double slope_subdiff_distance(const VectorRef& x, const VectorRef& g, const Vector& w) {
    const Index m = x.size();
    if (g.size() != m || w.size() != m)
        throw std::invalid_argument("slope_subdiff_distance: length mismatch");
    if (m == 0)
        return 0.0;
    const std::vector<Index> order = detail::magnitude_order(x);
    const double tol = kClusterTolerance * (1.0 + x.cwiseAbs().maxCoeff());
    double d2 = 0.0;
    Index k = 0;
    while (k < m) {
        const double head = std::abs(x[order[static_cast<std::size_t>(k)]]);
        if (head <= tol) {
            Vector tail(m - k);
            for (Index j = k; j < m; ++j)
                tail[j - k] = g[order[static_cast<std::size_t>(j)]];
            d2 += prox_sorted_l1(tail, w.tail(m - k).eval()).squaredNorm();
            break;
        }
        Index end = k + 1;
        while (end < m && head - std::abs(x[order[static_cast<std::size_t>(end)]]) <= tol)
            ++end;
        Vector signed_g(end - k);
        for (Index j = k; j < end; ++j) {
            const Index i = order[static_cast<std::size_t>(j)];
            signed_g[j - k] = x[i] < 0.0 ? -g[i] : g[i];
        }
        d2 += detail::permutohedron_sq_distance(std::move(signed_g), w.segment(k, end - k));
        k = end;
    }
    return std::sqrt(d2);
}

/// dist(g, lambda d||x||_1).
inline double l1_subdiff_distance(const VectorRef& x, const VectorRef& g, double lambda) {
    if (x.size() != g.size())
        throw std::invalid_argument("l1_subdiff_distance: length mismatch");
    double d2 = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double r = x[i] != 0.0 ? g[i] - std::copysign(lambda, x[i])
                                     : std::max(std::abs(g[i]) - lambda, 0.0);
        d2 += r * r;
    }
    return std::sqrt(d2);
}

/// Singular values below this fraction of max(1, sigma_1) count as zero.
inline constexpr double kRankTolerance = 1e-8;

/// Projection onto lambda times the nuclear-norm subdifferential at a fixed
/// matrix, described by the singular vectors of its nonzero part.
class NuclearSubdifferential {
public:
    NuclearSubdifferential(const MatrixRef& b, double lambda) : lambda_(lambda) {
        const Index r = b.rows(), c = b.cols();
        Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector& s = svd.singularValues();
        const double cut = kRankTolerance * std::max(1.0, s.size() ? s[0] : 0.0);
        Index rank = 0;
        while (rank < s.size() && s[rank] > cut)
            ++rank;
        u_ = svd.matrixU().leftCols(rank);
        v_ = svd.matrixV().leftCols(rank);
        left_perp_ = Matrix::Identity(r, r) - u_ * u_.transpose();
        right_perp_ = Matrix::Identity(c, c) - v_ * v_.transpose();
        anchor_ = lambda_ * u_ * v_.transpose();
    }

    Matrix project(const MatrixRef& m) const {
        const Matrix w = left_perp_ * m * right_perp_;
        return anchor_ + w - clipped_excess(w);
    }

    double distance(const MatrixRef& m) const { return (m - project(m)).norm(); }

private:
    // W - proj_{||.||_op <= lambda}(W), via the singular values above lambda.
    Matrix clipped_excess(const Matrix& w) const {
        if (w.size() == 0)
            return w;
        Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector excess = (svd.singularValues().array() - lambda_).max(0.0).matrix();
        return svd.matrixU() * excess.asDiagonal() * svd.matrixV().transpose();
    }

    double lambda_;
    Matrix u_, v_, left_perp_, right_perp_, anchor_;
};

/// dist(g, lambda d||b||_N).
inline double nuclear_subdiff_distance(const MatrixRef& b, const MatrixRef& g, double lambda) {
    return NuclearSubdifferential(b, lambda).distance(g);
}

struct ConeSearchOptions {
    int max_iterations = 3000;
    double tolerance = 1e-14;
    /// Stop as soon as the bound drops below this absolute value.
    double good_enough = 0.0;
};

/// dist(g, lambda d||b||_N + normal cone of {||.||_inf <= a} at b).
///
/// Minimizes dist(g - N, lambda d||b||_N) over N in the normal cone by
/// accelerated projected gradient; the returned value is attained by a
/// feasible N, so it bounds the exact distance from above.
inline double nuclear_box_subdiff_distance(const MatrixRef& b, const MatrixRef& g, double lambda,
                                           double a, const ConeSearchOptions& opts = {}) {
    NuclearSubdifferential sub(b, lambda);
    if (!std::isfinite(a))
        return sub.distance(g);
    const double active_tol = kClusterTolerance * (1.0 + a);
    Eigen::ArrayXXi sign = Eigen::ArrayXXi::Zero(b.rows(), b.cols());
    bool any_active = false;
    for (Index j = 0; j < b.cols(); ++j)
        for (Index i = 0; i < b.rows(); ++i) {
            if (b(i, j) >= a - active_tol)
                sign(i, j) = 1;
            else if (b(i, j) <= -a + active_tol)
                sign(i, j) = -1;
            any_active = any_active || sign(i, j) != 0;
        }
    if (!any_active)
        return sub.distance(g);

    auto project_cone = [&](Matrix n) {
        for (Index j = 0; j < n.cols(); ++j)
            for (Index i = 0; i < n.rows(); ++i) {
                if (sign(i, j) > 0)
                    n(i, j) = std::max(n(i, j), 0.0);
                else if (sign(i, j) < 0)
                    n(i, j) = std::min(n(i, j), 0.0);
                else
                    n(i, j) = 0.0;
            }
        return n;
    };
    auto residual = [&](const Matrix& n) {
        const Matrix shifted = g - n;
        return Matrix(shifted - sub.project(shifted));
    };

    Matrix n = project_cone(residual(Matrix::Zero(b.rows(), b.cols())));
    Matrix n_prev = n, extrap = n;
    double best = residual(Matrix::Zero(b.rows(), b.cols())).norm();
    double t = 1.0;
    const double target = std::max(opts.tolerance * (1.0 + g.norm()), opts.good_enough);
    for (int it = 0; it < opts.max_iterations && best > target; ++it) {
        // grad of 1/2 dist^2(g - N) in N is -residual; unit step.
        const Matrix r = residual(extrap);
        n = project_cone(extrap + r);
        const double value = residual(n).norm();
        if (value < best)
            best = value;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        extrap = n + ((t - 1.0) / t_next) * (n - n_prev);
        n_prev = n;
        t = t_next;
    }
    return best;
}

} // namespace shuber
