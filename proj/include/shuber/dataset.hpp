#pragma once

#include "shuber/norms.hpp"

#include <cstdint>
#include <optional>

namespace shuber {

/// Row-major flattening of a d1 x d2 matrix (the layout of one design row).
inline Vector flatten(const MatrixRef& m) {
    Vector out(m.size());
    Index k = 0;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            out[k++] = m(i, j);
    return out;
}

inline Matrix unflatten(const VectorRef& v, Index d1, Index d2) {
    if (v.size() != d1 * d2)
        throw std::invalid_argument("unflatten: size mismatch");
    Matrix out(d1, d2);
    Index k = 0;
    for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
            out(i, j) = v[k++];
    return out;
}

/// Generating parameters of a synthetic data set, kept for metrics and for
/// reconstructing y exactly.
struct GroundTruth {
    Matrix b_star;
    Matrix gamma_star;
    Vector theta_star;
    Vector noise;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// n feature matrices X_i (d1 x d2; d2 = 1 for vectors) stored as the rows
/// of an n x (d1 d2) matrix in row-major flattening, plus labels.
struct Dataset {
    Index d1 = 0;
    Index d2 = 0;
    Matrix x;
    Vector y;
    std::optional<GroundTruth> truth;

    Index n() const { return x.rows(); }
    Index p() const { return d1 * d2; }

    /// (<<X_i, B>>)_i
    Vector apply(const MatrixRef& b) const { return x * flatten(b); }
    Vector apply_flat(const VectorRef& b) const { return x * b; }
    /// sum_i r_i X_i, flattened.
    Vector adjoint_flat(const VectorRef& r) const { return x.transpose() * r; }

    void validate() const {
        if (d1 < 1 || d2 < 1)
            throw std::invalid_argument("Dataset: dimensions must be positive");
        if (x.cols() != p())
            throw std::invalid_argument("Dataset: design width does not match d1 * d2");
        if (y.size() != x.rows())
            throw std::invalid_argument("Dataset: label count does not match sample count");
        if (x.rows() < 1)
            throw std::invalid_argument("Dataset: empty sample");
    }
};

} // namespace shuber
