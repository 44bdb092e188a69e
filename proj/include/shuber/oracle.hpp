#pragma once

// Brute-force references for the prox operators, the sorted-Huber losses and
// small regression fits. Nothing here calls prox.hpp or solver.hpp: each
// routine recomputes sorted norms and solutions on its own.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace shuber::oracle {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Method { GRID, EXHAUSTIVE_PATTERN, PROJECTED_SUBGRADIENT, DENSE_LS, COORDINATE_DESCENT, SCAN };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::GRID: return "GRID";
    case Method::EXHAUSTIVE_PATTERN: return "EXHAUSTIVE_PATTERN";
    case Method::PROJECTED_SUBGRADIENT: return "PROJECTED_SUBGRADIENT";
    case Method::DENSE_LS: return "DENSE_LS";
    case Method::COORDINATE_DESCENT: return "COORDINATE_DESCENT";
    case Method::SCAN: return "SCAN";
    }
    return "?";
}

struct OracleResult {
    double value = 0.0;
    Vector argmin;
    Method method = Method::GRID;
    /// Upper bound on value - (true minimum); zero for exact enumerations.
    double certified_gap = 0.0;
};

inline constexpr Index kExhaustiveMaxDim = 6;
inline constexpr Index kSubgradientMaxDim = 50;

namespace detail {

inline double sorted_weighted_sum(const Vector& x, const Vector& w) {
    std::vector<double> a(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i)
        a[static_cast<std::size_t>(i)] = std::abs(x[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i)
        s += w[i] * a[static_cast<std::size_t>(i)];
    return s;
}

/// max_k (sum of k largest |u|) / (sum of k largest w).
inline double dual_norm(const Vector& u, const Vector& w) {
    std::vector<double> a(static_cast<std::size_t>(u.size()));
    for (Index i = 0; i < u.size(); ++i)
        a[static_cast<std::size_t>(i)] = std::abs(u[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double num = 0.0, den = 0.0, best = 0.0;
    for (Index k = 0; k < u.size(); ++k) {
        num += a[static_cast<std::size_t>(k)];
        den += w[k];
        best = std::max(best, num / den);
    }
    return best;
}

inline double prox_objective(const Vector& x, const Vector& v, const Vector& w) {
    return 0.5 * (x - v).squaredNorm() + sorted_weighted_sum(x, w);
}

inline void check_weights(const Vector& v, const Vector& w) {
    if (v.size() != w.size())
        throw std::invalid_argument("oracle: length mismatch");
    for (Index i = 0; i < w.size(); ++i)
        if (!(w[i] > 0.0) || (i > 0 && w[i] > w[i - 1]))
            throw std::invalid_argument("oracle: weights must be positive and nonincreasing");
}

/// Enumerate every assignment of coordinates to magnitude levels: level 0 is
/// the zero cluster, levels 1..K (all used) are clusters of equal magnitude
/// in decreasing order. For each, the cluster magnitudes solve the restricted
/// quadratic in closed form; signs follow v (flipping a sign against v never
/// helps). The minimizer is one of these candidates.
inline OracleResult exhaustive_prox(const Vector& v, const Vector& w) {
    const Index m = v.size();
    OracleResult best;
    best.method = Method::EXHAUSTIVE_PATTERN;
    best.value = std::numeric_limits<double>::infinity();
    if (m == 0) {
        best.value = 0.0;
        return best;
    }
    std::vector<int> level(static_cast<std::size_t>(m), 0);
    Vector x(m);
    const Index base = m + 1;
    Index total = 1;
    for (Index i = 0; i < m; ++i)
        total *= base;
    std::vector<int> count(static_cast<std::size_t>(m + 1));
    std::vector<double> mass(static_cast<std::size_t>(m + 1));
    for (Index code = 0; code < total; ++code) {
        Index c = code;
        std::fill(count.begin(), count.end(), 0);
        for (Index i = 0; i < m; ++i) {
            level[static_cast<std::size_t>(i)] = static_cast<int>(c % base);
            c /= base;
            ++count[static_cast<std::size_t>(level[static_cast<std::size_t>(i)])];
        }
        int top = 0;
        bool contiguous = true;
        for (int l = 1; l <= m; ++l) {
            if (count[static_cast<std::size_t>(l)] > 0) {
                if (top != l - 1) {
                    contiguous = false;
                    break;
                }
                top = l;
            }
        }
        if (!contiguous)
            continue;
        std::fill(mass.begin(), mass.end(), 0.0);
        for (Index i = 0; i < m; ++i)
            mass[static_cast<std::size_t>(level[static_cast<std::size_t>(i)])] += std::abs(v[i]);
        // Ranks: level 1 takes the first count[1] weights, and so on.
        std::vector<double> magnitude(static_cast<std::size_t>(top + 1), 0.0);
        Index pos = 0;
        for (int l = 1; l <= top; ++l) {
            const int k = count[static_cast<std::size_t>(l)];
            double wsum = 0.0;
            for (int j = 0; j < k; ++j)
                wsum += w[pos + j];
            pos += k;
            magnitude[static_cast<std::size_t>(l)] = std::max(0.0, (mass[static_cast<std::size_t>(l)] - wsum) / k);
        }
        for (Index i = 0; i < m; ++i) {
            const double mag = magnitude[static_cast<std::size_t>(level[static_cast<std::size_t>(i)])];
            x[i] = v[i] < 0.0 ? -mag : mag;
        }
        const double val = prox_objective(x, v, w);
        if (val < best.value) {
            best.value = val;
            best.argmin = x;
        }
    }
    return best;
}

/// Dual certificate for min 1/2||x - v||^2 + J(x): D(u) = <u, v> - 1/2||u||^2
/// over J*(u) <= 1, evaluated at the rescaled u = v - x.
inline double prox_duality_gap(const Vector& x, const Vector& v, const Vector& w) {
    Vector u = v - x;
    const double dn = dual_norm(u, w);
    if (dn > 1.0)
        u /= dn;
    const double dual = u.dot(v) - 0.5 * u.squaredNorm();
    return std::max(0.0, prox_objective(x, v, w) - dual);
}

/// Reads a cluster pattern off an approximate minimizer (magnitudes within
/// `merge` of each other share a cluster, those below it form the zero
/// cluster), solves the restricted quadratic of that pattern in closed form
/// and keeps the candidate if its duality gap is smaller. Several merge
/// radii are tried; the certificate decides, so a wrong pattern is harmless.
inline void polish_pattern(OracleResult& best, const Vector& v, const Vector& w) {
    const Index m = v.size();
    if (m == 0)
        return;
    const Vector start = best.argmin;
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(start[a]) > std::abs(start[b]); });
    for (double merge = 1e-1; merge >= 1e-9; merge *= 0.3) {
        Vector cand = Vector::Zero(m);
        Index pos = 0;
        while (pos < m) {
            const double head = std::abs(start[order[static_cast<std::size_t>(pos)]]);
            if (head < merge)
                break;
            Index end = pos + 1;
            while (end < m && head - std::abs(start[order[static_cast<std::size_t>(end)]]) < merge)
                ++end;
            double mass = 0.0, wsum = 0.0;
            for (Index k = pos; k < end; ++k) {
                mass += std::abs(v[order[static_cast<std::size_t>(k)]]);
                wsum += w[k];
            }
            const double mag = std::max(0.0, (mass - wsum) / static_cast<double>(end - pos));
            for (Index k = pos; k < end; ++k) {
                const Index i = order[static_cast<std::size_t>(k)];
                cand[i] = v[i] < 0.0 ? -mag : mag;
            }
            pos = end;
        }
        const double gap = prox_duality_gap(cand, v, w);
        if (gap < best.certified_gap) {
            best.argmin = cand;
            best.value = prox_objective(cand, v, w);
            best.certified_gap = gap;
        }
    }
}

/// Subgradient method for the 1-strongly convex prox objective with steps
/// 2/(k+1) and k-weighted averaging, projected onto the box |x_i| <= ||v||_inf
/// (which contains the minimizer). The magnitude order is maintained by
/// insertion sort since it changes little between iterations.
inline OracleResult subgradient_prox(const Vector& v, const Vector& w, int iterations) {
    const Index m = v.size();
    OracleResult out;
    out.method = Method::PROJECTED_SUBGRADIENT;
    const double bound = m ? v.cwiseAbs().maxCoeff() : 0.0;
    std::vector<double> x(v.data(), v.data() + m), avg(static_cast<std::size_t>(m), 0.0);
    double weight_sum = 0.0;
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    for (int k = 1; k <= iterations; ++k) {
        for (std::size_t i = 1; i < order.size(); ++i) {
            const Index key = order[i];
            const double mag = std::abs(x[static_cast<std::size_t>(key)]);
            std::size_t j = i;
            while (j > 0 && std::abs(x[static_cast<std::size_t>(order[j - 1])]) < mag) {
                order[j] = order[j - 1];
                --j;
            }
            order[j] = key;
        }
        const double weight = static_cast<double>(k);
        const double step = 2.0 / (k + 1.0);
        weight_sum += weight;
        for (Index r = 0; r < m; ++r) {
            const std::size_t i = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
            const double xi = x[i];
            const double g = (xi > 0.0 ? w[r] : (xi < 0.0 ? -w[r] : 0.0)) + xi - v[static_cast<Index>(i)];
            avg[i] += weight * xi;
            x[i] = std::clamp(xi - step * g, -bound, bound);
        }
    }
    out.argmin = Eigen::Map<const Vector>(avg.data(), m) / weight_sum;
    out.value = prox_objective(out.argmin, v, w);
    out.certified_gap = prox_duality_gap(out.argmin, v, w);
    polish_pattern(out, v, w);
    return out;
}

} // namespace detail

/// Global minimizer of 1/2 ||x - v||^2 + sum_i w_i |x|_(i).
inline OracleResult brute_prox_slope(const Vector& v, const Vector& w,
                                     Method method = Method::EXHAUSTIVE_PATTERN, int iterations = 100000) {
    detail::check_weights(v, w);
    switch (method) {
    case Method::EXHAUSTIVE_PATTERN:
        if (v.size() > kExhaustiveMaxDim)
            throw std::invalid_argument("brute_prox_slope: exhaustive search is limited to dimension 6");
        return detail::exhaustive_prox(v, w);
    case Method::PROJECTED_SUBGRADIENT:
        if (v.size() > kSubgradientMaxDim)
            throw std::invalid_argument("brute_prox_slope: subgradient search is limited to dimension 50");
        return detail::subgradient_prox(v, w, iterations);
    default: break;
    }
    throw std::invalid_argument("brute_prox_slope: unsupported method");
}

namespace detail {

inline double infconv_q1_objective(const Vector& z, const Vector& u, const Vector& w, double tau) {
    return (u - z).norm() + tau * sorted_weighted_sum(z, w);
}

/// Dual of min_z ||u - z|| + tau J(z): max <q, u> over ||q|| <= 1, J*(q) <= tau.
inline double infconv_q1_gap(const Vector& z, const Vector& u, const Vector& w, double tau) {
    const Vector r = u - z;
    const double rn = r.norm();
    if (rn == 0.0)
        return std::numeric_limits<double>::infinity();
    Vector q = r / rn;
    const double dn = dual_norm(q, w);
    if (dn > tau)
        q *= tau / dn;
    return std::max(0.0, infconv_q1_objective(z, u, w, tau) - q.dot(u));
}

} // namespace detail

/// min_z ||u - z||_2 + tau ||z||_w.
///
/// GRID (dimension <= 2): dense grid over the box between 0 and u (which
/// holds a minimizer), then repeated local zooms. SCAN (dimension <= 6):
/// scan of the scalar t with z(t) the exhaustive prox of u at t tau w.
inline OracleResult brute_infconv_q1(const Vector& u, const Vector& w, double tau, Method method = Method::GRID) {
    detail::check_weights(u, w);
    if (!(tau > 0.0))
        throw std::invalid_argument("brute_infconv_q1: tau must be positive");
    const Index m = u.size();
    OracleResult out;
    out.method = method;
    const double lip = 1.0 + tau * w.norm();
    if (u.norm() == 0.0) {
        out.argmin = Vector::Zero(m);
        return out;
    }
    if (method == Method::GRID) {
        if (m > 2)
            throw std::invalid_argument("brute_infconv_q1: grid search is limited to dimension 2");
        const int points = 1001;
        Vector lo = u.cwiseMin(0.0), hi = u.cwiseMax(0.0);
        Vector best_z = Vector::Zero(m);
        double best = detail::infconv_q1_objective(best_z, u, w, tau);
        double h = 0.0;
        for (int level = 0; level < 8; ++level) {
            Vector step = (hi - lo) / (points - 1);
            h = step.norm();
            Vector z(m);
            const int n1 = points, n2 = m == 2 ? points : 1;
            for (int a = 0; a < n1; ++a) {
                z[0] = lo[0] + a * step[0];
                for (int b = 0; b < n2; ++b) {
                    if (m == 2)
                        z[1] = lo[1] + b * step[1];
                    const double val = detail::infconv_q1_objective(z, u, w, tau);
                    if (val < best) {
                        best = val;
                        best_z = z;
                    }
                }
            }
            lo = best_z - 4.0 * step;
            hi = best_z + 4.0 * step;
        }
        out.value = best;
        out.argmin = best_z;
        out.certified_gap = std::min(0.5 * lip * h, detail::infconv_q1_gap(best_z, u, w, tau));
        return out;
    }
    if (method == Method::SCAN) {
        if (m > kExhaustiveMaxDim)
            throw std::invalid_argument("brute_infconv_q1: scan is limited to dimension 6");
        auto eval = [&](double t) {
            Vector z = t == 0.0 ? u : detail::exhaustive_prox(u, (t * tau * w).eval()).argmin;
            return std::make_pair(detail::infconv_q1_objective(z, u, w, tau), z);
        };
        const double tmax = u.norm();
        auto [best, best_z] = eval(0.0);
        double best_t = 0.0;
        const int points = 400;
        for (int k = 1; k <= points; ++k) {
            const double t = tmax * k / points;
            auto [val, z] = eval(t);
            if (val < best) {
                best = val;
                best_z = z;
                best_t = t;
            }
        }
        // Golden-section refinement on the bracket around the best sample.
        double a = std::max(0.0, best_t - tmax / points), b = std::min(tmax, best_t + tmax / points);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 80; ++it) {
            const double c = b - phi * (b - a), d = a + phi * (b - a);
            auto fc = eval(c), fd = eval(d);
            if (fc.first < best) {
                best = fc.first;
                best_z = fc.second;
            }
            if (fd.first < best) {
                best = fd.first;
                best_z = fd.second;
            }
            if (fc.first <= fd.first)
                b = d;
            else
                a = c;
        }
        out.value = best;
        out.argmin = best_z;
        out.certified_gap = detail::infconv_q1_gap(best_z, u, w, tau);
        return out;
    }
    throw std::invalid_argument("brute_infconv_q1: unsupported method");
}

/// Least squares through a column-pivoted QR; throws on rank deficiency.
/// value = ||y - X b||^2.
inline OracleResult dense_least_squares(const Matrix& x, const Vector& y) {
    if (x.rows() != y.size())
        throw std::invalid_argument("dense_least_squares: shape mismatch");
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < x.cols())
        throw std::runtime_error("dense_least_squares: design is rank deficient (rank " +
                                 std::to_string(qr.rank()) + " < " + std::to_string(x.cols()) + ")");
    OracleResult out;
    out.method = Method::DENSE_LS;
    out.argmin = qr.solve(y);
    out.value = (y - x * out.argmin).squaredNorm();
    return out;
}

/// Lasso (1/(2n)) ||y - X b||^2 + lambda ||b||_1 by cyclic coordinate descent.
inline OracleResult lasso_coordinate_descent(const Matrix& x, const Vector& y, double lambda,
                                             int max_passes = 100000, double tolerance = 1e-14) {
    if (x.rows() != y.size())
        throw std::invalid_argument("lasso_coordinate_descent: shape mismatch");
    const Index n = x.rows(), p = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector b = Vector::Zero(p);
    Vector r = y;
    const Vector col_sq = x.colwise().squaredNorm().transpose() * inv_n;
    for (int pass = 0; pass < max_passes; ++pass) {
        double change = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0)
                continue;
            const double rho = x.col(j).dot(r) * inv_n + col_sq[j] * b[j];
            const double mag = std::abs(rho) - lambda;
            const double next = mag > 0.0 ? std::copysign(mag, rho) / col_sq[j] : 0.0;
            const double delta = next - b[j];
            if (delta != 0.0) {
                r -= delta * x.col(j);
                b[j] = next;
                change = std::max(change, std::abs(delta));
            }
        }
        if (change <= tolerance * (1.0 + b.cwiseAbs().maxCoeff()))
            break;
    }
    OracleResult out;
    out.method = Method::COORDINATE_DESCENT;
    out.argmin = b;
    r = y - x * b;
    out.value = 0.5 * inv_n * r.squaredNorm() + lambda * b.lpNorm<1>();
    return out;
}

} // namespace shuber::oracle
