#pragma once

#include "shuber/norms.hpp"

#include <limits>
#include <numeric>
#include <vector>

namespace shuber {

namespace detail {

inline void check_slope_weights(const Vector& w, const char* who) {
    for (Index i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0) || !std::isfinite(w[i]))
            throw std::invalid_argument(std::string(who) + ": weights must be positive");
        if (i > 0 && w[i] > w[i - 1])
            throw std::invalid_argument(std::string(who) + ": weights must be nonincreasing");
    }
}

/// Indices of v ordered by nonincreasing |v|; ties keep index order.
inline std::vector<Index> magnitude_order(const VectorRef& v) {
    std::vector<Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(v[a]) > std::abs(v[b]); });
    return order;
}

} // namespace detail

/// argmin_x 1/2 ||x - v||^2 + sum_i w_i |x|_(i).
///
/// Sorts |v|, subtracts the weights and pools adjacent violators on a stack
/// so the result is nonincreasing and nonnegative, then restores order and
/// signs. O(m log m).
inline Vector prox_sorted_l1(const VectorRef& v, const Vector& w) {
    const Index m = v.size();
    if (w.size() != m)
        throw std::invalid_argument("prox_sorted_l1: length mismatch");
    detail::check_slope_weights(w, "prox_sorted_l1");
    if (m == 0)
        return Vector();

    const std::vector<Index> order = detail::magnitude_order(v);

    struct Block {
        Index first;
        Index last;
        double sum;
        double mean;
    };
    std::vector<Block> stack;
    stack.reserve(static_cast<std::size_t>(m));
    for (Index k = 0; k < m; ++k) {
        const double d = std::abs(v[order[static_cast<std::size_t>(k)]]) - w[k];
        stack.push_back({k, k, d, d});
        while (stack.size() > 1 && stack[stack.size() - 2].mean <= stack.back().mean) {
            Block top = stack.back();
            stack.pop_back();
            Block& below = stack.back();
            below.last = top.last;
            below.sum += top.sum;
            below.mean = below.sum / static_cast<double>(below.last - below.first + 1);
        }
    }

    Vector x(m);
    for (const Block& b : stack) {
        const double mag = std::max(b.mean, 0.0);
        for (Index k = b.first; k <= b.last; ++k) {
            const Index i = order[static_cast<std::size_t>(k)];
            x[i] = v[i] < 0.0 ? -mag : mag;
        }
    }
    return x;
}

inline Vector prox_sorted_l1(const VectorRef& v, const WeightSequence& w) {
    return prox_sorted_l1(v, w.values());
}

/// Elementwise sign(v) max(|v| - eta, 0).
template <class Derived>
typename Derived::PlainObject prox_soft_threshold(const Eigen::MatrixBase<Derived>& v, double eta) {
    if (!(eta >= 0.0))
        throw std::invalid_argument("prox_soft_threshold: threshold must be nonnegative");
    return v.unaryExpr([eta](double x) {
        const double mag = std::abs(x) - eta;
        return mag > 0.0 ? std::copysign(mag, x) : 0.0;
    });
}

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

namespace detail {

inline Matrix singular_value_threshold(const MatrixRef& m, double eta) {
    if (m.size() == 0 || eta == 0.0)
        return m;
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = (svd.singularValues().array() - eta).max(0.0).matrix();
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline void check_box(double a, const char* who) {
    if (!(a > 0.0))
        throw std::invalid_argument(std::string(who) + ": box bound must be positive or infinite");
}

} // namespace detail

/// Singular value soft-thresholding by eta followed by clipping every entry
/// to [-a, a]. With a = infinity this is the exact nuclear-norm prox.
inline Matrix prox_nuclear_box(const MatrixRef& m, double eta, double a = kUnbounded) {
    if (!(eta >= 0.0))
        throw std::invalid_argument("prox_nuclear_box: threshold must be nonnegative");
    detail::check_box(a, "prox_nuclear_box");
    Matrix out = detail::singular_value_threshold(m, eta);
    if (std::isfinite(a))
        out = out.cwiseMax(-a).cwiseMin(a);
    return out;
}

struct BoxProxOptions {
    int max_iterations = 20000;
    double tolerance = 1e-13;
};

/// Exact prox of eta ||.||_N + indicator{||.||_inf <= a}.
///
/// Solved through the dual in the box multiplier Z: the inner minimizer is
/// X(Z) = SVT(M - Z, eta), a 1-Lipschitz gradient, and the multiplier takes
/// accelerated proximal steps Z <- soft(Z + X(Z), a) with adaptive restart.
/// From a zero multiplier the first iterate equals prox_nuclear_box; the
/// returned point is clipped to the box, so it is always feasible.
/// `multiplier`, when given, warm-starts Z and receives the final one
/// (successive calls from an iterative solver have nearby multipliers).
inline Matrix prox_nuclear_box_exact(const MatrixRef& m, double eta, double a, const BoxProxOptions& opts = {},
                                     Matrix* multiplier = nullptr) {
    if (!(eta >= 0.0))
        throw std::invalid_argument("prox_nuclear_box_exact: threshold must be nonnegative");
    detail::check_box(a, "prox_nuclear_box_exact");
    if (!std::isfinite(a))
        return detail::singular_value_threshold(m, eta);
    auto soft = [](const Matrix& v, double t) { return Matrix((v.array().abs() - t).max(0.0) * v.array().sign()); };
    Matrix z = Matrix::Zero(m.rows(), m.cols());
    if (multiplier && multiplier->rows() == m.rows() && multiplier->cols() == m.cols())
        z = *multiplier;
    Matrix y = z;
    Matrix x, x_prev;
    double t = 1.0;
    const double scale = 1.0 + m.norm();
    for (int it = 0; it < opts.max_iterations; ++it) {
        x_prev = x;
        x = detail::singular_value_threshold(m - y, eta);
        const Matrix z_next = soft(y + x, a);
        if ((y - z_next).cwiseProduct(z_next - z).sum() > 0.0)
            t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = it == 0 ? kUnbounded : (x - x_prev).norm();
        y = z_next + ((t - 1.0) / t_next) * (z_next - z);
        z = z_next;
        t = t_next;
        const double violation = (x - x.cwiseMax(-a).cwiseMin(a)).norm();
        if (change <= opts.tolerance * scale && violation <= opts.tolerance * scale)
            break;
    }
    if (multiplier)
        *multiplier = z;
    return x.cwiseMax(-a).cwiseMin(a);
}

/// Value of a sorted-Huber infimal convolution and the z attaining it.
struct SortedHuberValue {
    double value = 0.0;
    Vector minimizer_z;
};

/// rho_2 infimal convolution: min_z 1/2 ||u - z||^2 + tau ||z||_w.
inline SortedHuberValue sorted_huber_q2(const VectorRef& u, const WeightSequence& w, double tau) {
    if (!(tau > 0.0))
        throw std::invalid_argument("sorted_huber_q2: tau must be positive");
    if (u.size() != w.size())
        throw std::invalid_argument("sorted_huber_q2: length mismatch");
    SortedHuberValue out;
    if (u.squaredNorm() == 0.0) {
        out.minimizer_z = Vector::Zero(u.size());
        return out;
    }
    out.minimizer_z = prox_sorted_l1(u, (tau * w.values()).eval());
    out.value = 0.5 * (u - out.minimizer_z).squaredNorm() + tau * slope_norm(out.minimizer_z, w);
    return out;
}

struct BisectionOptions {
    double tolerance = 1e-10;
    int max_iterations = 200;
};

/// rho_1 infimal convolution: min_z ||u - z||_2 + tau ||z||_w.
///
/// Away from the two trivial regimes the minimizer is z(t) = prox(u, t tau w)
/// where t = ||u - z(t)||; the ratio ||u - z(t)|| / t is monotone in t and
/// is bisected on (0, ||u||].
inline SortedHuberValue sorted_huber_q1(const VectorRef& u, const WeightSequence& w, double tau,
                                        const BisectionOptions& opts = {}) {
    if (!(tau > 0.0))
        throw std::invalid_argument("sorted_huber_q1: tau must be positive");
    if (u.size() != w.size())
        throw std::invalid_argument("sorted_huber_q1: length mismatch");
    const Index n = u.size();
    SortedHuberValue out;
    const double unorm = u.norm();
    if (unorm == 0.0) {
        out.minimizer_z = Vector::Zero(n);
        return out;
    }
    // z = 0 is optimal iff u / ||u|| lies in tau times the dual unit ball.
    if (detail::dual_slope_norm(u / unorm, w.values()) <= tau) {
        out.minimizer_z = Vector::Zero(n);
        out.value = unorm;
        return out;
    }

    const Vector tw = tau * w.values();
    auto z_at = [&](double t) { return prox_sorted_l1(u, (t * tw).eval()); };

    double lo = 0.0, hi = unorm;
    const double tol = opts.tolerance * std::max(1.0, unorm);
    int it = 0;
    for (; it < opts.max_iterations && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gap = (u - z_at(mid)).norm() - mid;
        if (gap > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (hi - lo > tol)
        throw std::runtime_error("sorted_huber_q1: bisection did not converge");

    auto objective = [&](const Vector& z) { return (u - z).norm() + tau * slope_norm(z, w); };
    out.minimizer_z = z_at(hi);
    out.value = objective(out.minimizer_z);
    // The bisection root is only resolved to tol; fall back to z = u when it
    // is at least as good (the regime where tau ||.||_w never pays off).
    const double at_u = tau * slope_norm(u, w);
    if (at_u <= out.value) {
        out.minimizer_z = u;
        out.value = at_u;
    }
    return out;
}

} // namespace shuber
