#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace shuber {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Default constant A in the weights sqrt(log(A n / i)).
inline constexpr double kDefaultWeightConstant = 10.0;

/// Nonincreasing positive weights for the sorted-l1 (Slope) norm.
///
/// Built either from the logarithmic profile sqrt(log(A n / i)) or from an
/// explicit list (e.g. the constant sequence behind classical Huber).
class WeightSequence {
public:
    WeightSequence() = default;

    static WeightSequence logarithmic(Index n, double a_const = kDefaultWeightConstant) {
        if (n < 1)
            throw std::invalid_argument("WeightSequence: length must be positive");
        if (!(a_const >= 2.0) || !std::isfinite(a_const))
            throw std::invalid_argument("WeightSequence: constant A must be >= 2");
        Vector w(n);
        const double an = a_const * static_cast<double>(n);
        for (Index i = 0; i < n; ++i)
            w[i] = std::sqrt(std::log(an / static_cast<double>(i + 1)));
        return WeightSequence(std::move(w), a_const);
    }

    static WeightSequence constant(Index n, double value) {
        if (n < 1)
            throw std::invalid_argument("WeightSequence: length must be positive");
        return from_values(Vector::Constant(n, value));
    }

    static WeightSequence from_values(Vector w) {
        if (w.size() < 1)
            throw std::invalid_argument("WeightSequence: empty weights");
        for (Index i = 0; i < w.size(); ++i) {
            if (!(w[i] > 0.0) || !std::isfinite(w[i]))
                throw std::invalid_argument("WeightSequence: weights must be positive and finite");
            if (i > 0 && w[i] > w[i - 1])
                throw std::invalid_argument("WeightSequence: weights must be nonincreasing");
        }
        return WeightSequence(std::move(w), std::nan(""));
    }

    const Vector& values() const { return w_; }
    double operator[](Index i) const { return w_[i]; }
    Index size() const { return w_.size(); }
    bool empty() const { return w_.size() == 0; }
    /// NaN when the sequence was not built from the logarithmic profile.
    double a_const() const { return a_const_; }

    /// Same profile multiplied by c > 0.
    WeightSequence scaled(double c) const {
        if (!(c > 0.0))
            throw std::invalid_argument("WeightSequence::scaled: factor must be positive");
        return WeightSequence(w_ * c, a_const_);
    }

private:
    WeightSequence(Vector w, double a) : w_(std::move(w)), a_const_(a) {}

    Vector w_;
    double a_const_ = std::nan("");
};

enum class NormTag { L1, LINF, FROBENIUS, NUCLEAR, SLOPE_N, SLOPE_P, OPERATOR };

inline std::string to_string(NormTag tag) {
    switch (tag) {
    case NormTag::L1: return "L1";
    case NormTag::LINF: return "LINF";
    case NormTag::FROBENIUS: return "FROBENIUS";
    case NormTag::NUCLEAR: return "NUCLEAR";
    case NormTag::SLOPE_N: return "SLOPE_N";
    case NormTag::SLOPE_P: return "SLOPE_P";
    case NormTag::OPERATOR: return "OPERATOR";
    }
    return "?";
}

inline WeightSequence slope_weights(Index n, double a_const = kDefaultWeightConstant) {
    return WeightSequence::logarithmic(n, a_const);
}

/// Absolute values sorted nonincreasingly.
inline Vector sorted_magnitudes(const VectorRef& u) {
    Vector a = u.cwiseAbs();
    std::sort(a.data(), a.data() + a.size(), std::greater<>());
    return a;
}

/// sum_i w_i |u|_(i) with |u|_(1) >= ... >= |u|_(m).
inline double slope_norm(const VectorRef& u, const Vector& w) {
    if (u.size() != w.size())
        throw std::invalid_argument("slope_norm: length mismatch");
    return sorted_magnitudes(u).dot(w);
}

inline double slope_norm(const VectorRef& u, const WeightSequence& w) {
    return slope_norm(u, w.values());
}

/// Omega = (sum_{i <= o} w_i^2)^{1/2}.
inline double omega_cap(const WeightSequence& w, Index o) {
    if (o < 0 || o > w.size())
        throw std::out_of_range("omega_cap: o must lie in [0, n]");
    return std::sqrt(w.values().head(o).squaredNorm());
}

namespace detail {

/// Dual of the Slope norm: max_k (sum_{i<=k} |v|_(i)) / (sum_{i<=k} w_i).
inline double dual_slope_norm(const VectorRef& v, const Vector& w) {
    if (v.size() != w.size())
        throw std::invalid_argument("dual_slope_norm: length mismatch");
    const Vector a = sorted_magnitudes(v);
    double num = 0.0, den = 0.0, best = 0.0;
    for (Index k = 0; k < a.size(); ++k) {
        num += a[k];
        den += w[k];
        best = std::max(best, num / den);
    }
    return best;
}

inline Vector singular_values(const MatrixRef& m) {
    if (m.size() == 0)
        return Vector();
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

} // namespace detail

/// Norm of a matrix (vectors are d x 1 matrices). The Slope tags need the
/// weight sequence matching the flattened length.
inline double matrix_norm(const MatrixRef& m, NormTag tag, const WeightSequence& w = {}) {
    switch (tag) {
    case NormTag::L1: return m.cwiseAbs().sum();
    case NormTag::LINF: return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    case NormTag::FROBENIUS: return m.norm();
    case NormTag::NUCLEAR: return detail::singular_values(m).sum();
    case NormTag::OPERATOR: {
        const Vector s = detail::singular_values(m);
        return s.size() == 0 ? 0.0 : s[0];
    }
    case NormTag::SLOPE_N:
    case NormTag::SLOPE_P: {
        Vector flat = Eigen::Map<const Vector>(Matrix(m).data(), m.size());
        return slope_norm(flat, w);
    }
    }
    throw std::invalid_argument("matrix_norm: unknown tag");
}

} // namespace shuber
