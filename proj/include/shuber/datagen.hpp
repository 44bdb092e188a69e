#pragma once

#include "shuber/dataset.hpp"
#include "shuber/random.hpp"

#include <Eigen/QR>

#include <numeric>
#include <string>
#include <vector>

namespace shuber {

enum class TruthKind { SPARSE_VECTOR, LOW_RANK, LOW_RANK_PLUS_SPARSE };

inline std::string to_string(TruthKind k) {
    switch (k) {
    case TruthKind::SPARSE_VECTOR: return "SPARSE_VECTOR";
    case TruthKind::LOW_RANK: return "LOW_RANK";
    case TruthKind::LOW_RANK_PLUS_SPARSE: return "LOW_RANK_PLUS_SPARSE";
    }
    return "?";
}

inline TruthKind truth_kind_from_string(const std::string& s) {
    if (s == "SPARSE_VECTOR") return TruthKind::SPARSE_VECTOR;
    if (s == "LOW_RANK") return TruthKind::LOW_RANK;
    if (s == "LOW_RANK_PLUS_SPARSE") return TruthKind::LOW_RANK_PLUS_SPARSE;
    throw std::invalid_argument("unknown truth kind: " + s);
}

struct GroundTruthSpec {
    TruthKind kind = TruthKind::SPARSE_VECTOR;
    Index s = 0;
    Index r = 0;
    /// Nonzero coordinate of b* (sparse) or common singular value of B* (low rank).
    double entry_value = 0.0;
    /// a*: the low-rank part satisfies ||B*||_inf = a* / sqrt(n) (decomposition only).
    double spikeness_a = 0.0;
    /// Value of the nonzero entries of Gamma* (decomposition only).
    double gamma_value = 0.0;
    /// Nonzero coordinate of theta* (outlier magnitude before the sqrt(n) scaling).
    double outlier_value = 0.0;
    double sigma = 1.0;

    void validate(Index d1, Index d2) const {
        const Index p = d1 * d2;
        if (d1 < 1 || d2 < 1)
            throw std::invalid_argument("GroundTruthSpec: dimensions must be positive");
        if (!(sigma > 0.0))
            throw std::invalid_argument("GroundTruthSpec: sigma must be positive");
        if (s < 0 || r < 0)
            throw std::invalid_argument("GroundTruthSpec: s and r must be nonnegative");
        switch (kind) {
        case TruthKind::SPARSE_VECTOR:
            if (s > p)
                throw std::invalid_argument("GroundTruthSpec: sparsity exceeds dimension");
            break;
        case TruthKind::LOW_RANK:
            if (r > std::min(d1, d2))
                throw std::invalid_argument("GroundTruthSpec: rank exceeds min(d1, d2)");
            break;
        case TruthKind::LOW_RANK_PLUS_SPARSE:
            if (r > std::min(d1, d2))
                throw std::invalid_argument("GroundTruthSpec: rank exceeds min(d1, d2)");
            if (s > p)
                throw std::invalid_argument("GroundTruthSpec: sparsity exceeds dimension");
            if (r > 0 && !(spikeness_a > 0.0))
                throw std::invalid_argument("GroundTruthSpec: spikeness a* must be positive");
            break;
        }
    }
};

/// i.i.d. N(0, 1) design: entry (i, row, col) is keyed by (seed, i, row, col).
inline Matrix gen_design(Index n, Index d1, Index d2, std::uint64_t seed) {
    if (n < 1 || d1 < 1 || d2 < 1)
        throw std::invalid_argument("gen_design: dimensions must be positive");
    const CounterRng rng(seed, streams::kDesign);
    Matrix x(n, d1 * d2);
    for (Index i = 0; i < n; ++i)
        for (Index a = 0; a < d1; ++a)
            for (Index b = 0; b < d2; ++b)
                x(i, a * d2 + b) = rng.normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(a),
                                              static_cast<std::uint64_t>(b));
    return x;
}

namespace detail {

/// Haar-distributed d x d orthogonal matrix: QR of a Gaussian matrix with
/// the signs of diag(R) folded into Q.
inline Matrix haar_orthogonal(Index d, std::uint64_t seed, std::uint64_t stream) {
    const CounterRng rng(seed, stream);
    Matrix g(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            g(i, j) = rng.normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < d; ++j)
        if (r(j, j) < 0.0)
            q.col(j) = -q.col(j);
    return q;
}

/// Uniformly random ordering of {0, ..., p-1} (Fisher-Yates on the counter stream).
inline std::vector<Index> random_permutation(Index p, std::uint64_t seed) {
    const CounterRng rng(seed, streams::kSupport);
    std::vector<Index> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = 0; i + 1 < p; ++i) {
        const double u = rng.uniform({static_cast<std::uint64_t>(i)});
        const Index j = i + std::min<Index>(static_cast<Index>(u * static_cast<double>(p - i)), p - i - 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

} // namespace detail

struct TruthPair {
    Matrix b_star;
    Matrix gamma_star;
};

/// Structured ground truth. The singular bases and the sparse support are
/// drawn once per seed and truncated, so truths for different (r, s) under
/// one seed are nested.
inline TruthPair gen_truth(const GroundTruthSpec& spec, Index d1, Index d2, Index n, std::uint64_t seed) {
    spec.validate(d1, d2);
    if (n < 1)
        throw std::invalid_argument("gen_truth: n must be positive");
    TruthPair out{Matrix::Zero(d1, d2), Matrix::Zero(d1, d2)};
    switch (spec.kind) {
    case TruthKind::SPARSE_VECTOR: {
        Vector b = Vector::Zero(d1 * d2);
        b.head(spec.s).setConstant(spec.entry_value);
        out.b_star = unflatten(b, d1, d2);
        break;
    }
    case TruthKind::LOW_RANK:
    case TruthKind::LOW_RANK_PLUS_SPARSE: {
        if (spec.r > 0) {
            const Matrix u = detail::haar_orthogonal(d1, seed, streams::kLeftBasis).leftCols(spec.r);
            const Matrix v = detail::haar_orthogonal(d2, seed, streams::kRightBasis).leftCols(spec.r);
            out.b_star = u * v.transpose();
            if (spec.kind == TruthKind::LOW_RANK) {
                out.b_star *= spec.entry_value;
            } else {
                const double target = spec.spikeness_a / std::sqrt(static_cast<double>(n));
                out.b_star *= target / out.b_star.cwiseAbs().maxCoeff();
            }
        }
        if (spec.kind == TruthKind::LOW_RANK_PLUS_SPARSE && spec.s > 0) {
            Vector g = Vector::Zero(d1 * d2);
            const std::vector<Index> perm = detail::random_permutation(d1 * d2, seed);
            for (Index k = 0; k < spec.s; ++k)
                g[perm[static_cast<std::size_t>(k)]] = spec.gamma_value;
            out.gamma_star = unflatten(g, d1, d2);
        }
        break;
    }
    }
    return out;
}

/// o = round(eps n) outliers.
inline Index outlier_count(double epsilon, Index n) {
    return static_cast<Index>(std::llround(epsilon * static_cast<double>(n)));
}

struct Labels {
    Vector y;
    Vector theta_star;
    Vector noise;
};

/// y = X(B* + Gamma*) + sqrt(n) theta* + xi with the first round(eps n)
/// entries of theta* equal to outlier_value and xi ~ N(0, sigma^2).
inline Labels gen_labels(const Matrix& x, const Matrix& b_star, const Matrix& gamma_star, double sigma,
                         double epsilon, double outlier_value, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon <= 0.5))
        throw std::invalid_argument("gen_labels: epsilon must lie in [0, 1/2]");
    if (!(sigma > 0.0))
        throw std::invalid_argument("gen_labels: sigma must be positive");
    if (x.cols() != b_star.size() || b_star.rows() != gamma_star.rows() || b_star.cols() != gamma_star.cols())
        throw std::invalid_argument("gen_labels: shape mismatch");
    const Index n = x.rows();
    const CounterRng rng(seed, streams::kNoise);
    Labels out;
    out.noise.resize(n);
    for (Index i = 0; i < n; ++i)
        out.noise[i] = sigma * rng.normal(static_cast<std::uint64_t>(i));
    out.theta_star = Vector::Zero(n);
    out.theta_star.head(outlier_count(epsilon, n)).setConstant(outlier_value);
    out.y = x * flatten(b_star + gamma_star) + std::sqrt(static_cast<double>(n)) * out.theta_star + out.noise;
    return out;
}

/// Full synthetic data set from one seed.
inline Dataset generate_dataset(const GroundTruthSpec& spec, Index n, Index d1, Index d2, double epsilon,
                                std::uint64_t seed) {
    Dataset ds;
    ds.d1 = d1;
    ds.d2 = d2;
    ds.x = gen_design(n, d1, d2, seed);
    TruthPair truth = gen_truth(spec, d1, d2, n, seed);
    Labels labels = gen_labels(ds.x, truth.b_star, truth.gamma_star, spec.sigma, epsilon, spec.outlier_value, seed);
    ds.y = std::move(labels.y);
    ds.truth = GroundTruth{std::move(truth.b_star), std::move(truth.gamma_star), std::move(labels.theta_star),
                           std::move(labels.noise), spec.sigma, seed};
    return ds;
}

// ---------------------------------------------------------------------------
// Experiment presets (a) - (k)

enum class Variant { SORTED_HUBER, HUBER, NON_ROBUST };

inline std::string to_string(Variant v) {
    switch (v) {
    case Variant::SORTED_HUBER: return "SORTED_HUBER";
    case Variant::HUBER: return "HUBER";
    case Variant::NON_ROBUST: return "NON_ROBUST";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "SORTED_HUBER" || s == "sorted") return Variant::SORTED_HUBER;
    if (s == "HUBER" || s == "huber") return Variant::HUBER;
    if (s == "NON_ROBUST" || s == "nonrobust") return Variant::NON_ROBUST;
    throw std::invalid_argument("unknown variant: " + s);
}

enum class SweepKind { EPSILON, RANK, SPARSITY };

inline std::string to_string(SweepKind k) {
    switch (k) {
    case SweepKind::EPSILON: return "epsilon";
    case SweepKind::RANK: return "r";
    case SweepKind::SPARSITY: return "s";
    }
    return "?";
}

struct StructurePoint {
    Index r = 0;
    Index s = 0;
    bool operator==(const StructurePoint&) const = default;
};

struct ExperimentGrid {
    SweepKind sweep = SweepKind::EPSILON;
    std::vector<double> eps_grid;
    std::vector<StructurePoint> structures;
    std::vector<Variant> variants;
    Index reps = 1;
};

struct PresetConfig {
    char id = 'a';
    GroundTruthSpec truth;
    Index n = 0;
    Index d1 = 0;
    Index d2 = 0;
    ExperimentGrid grid;

    /// Truth spec of one structure point.
    GroundTruthSpec truth_at(const StructurePoint& pt) const {
        GroundTruthSpec t = truth;
        t.r = pt.r;
        t.s = pt.s;
        return t;
    }
};

struct PresetOverrides {
    std::optional<Index> n, p, d1, d2, reps, s, r;
    std::optional<double> sigma, entry_value, outlier_value, spikeness_a, gamma_value;
    std::optional<std::vector<double>> eps_grid;
    std::optional<std::vector<StructurePoint>> structures;
    std::optional<std::vector<Variant>> variants;
};

inline std::vector<double> default_eps_grid() { return {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30}; }

inline bool is_sparse_preset(char id) { return id >= 'a' && id <= 'c'; }

/// Reduced sizes for minutes-scale runs.
inline PresetOverrides desk_overrides(char id) {
    PresetOverrides o;
    o.n = 400;
    if (is_sparse_preset(id)) {
        o.p = 100;
        o.reps = 20;
    } else {
        o.d1 = 10;
        o.d2 = 10;
        o.reps = 10;
    }
    return o;
}

/// Experiment configuration (a)-(k) with overrides applied on top.
inline PresetConfig preset(char id, const PresetOverrides& ov = {}) {
    PresetConfig c;
    c.id = id;
    GroundTruthSpec& t = c.truth;
    ExperimentGrid& g = c.grid;
    t.sigma = 1.0;
    g.eps_grid = default_eps_grid();
    switch (id) {
    case 'a':
    case 'b':
    case 'c':
        t.kind = TruthKind::SPARSE_VECTOR;
        c.n = 1000;
        c.d1 = 100;
        c.d2 = 1;
        g.reps = 100;
        if (id == 'a') {
            t.entry_value = t.outlier_value = 10.0;
            g.structures = {{0, 15}, {0, 25}, {0, 35}};
            g.variants = {Variant::SORTED_HUBER};
        } else if (id == 'b') {
            t.entry_value = t.outlier_value = 50.0;
            g.structures = {{0, 25}};
            g.variants = {Variant::SORTED_HUBER, Variant::HUBER};
        } else {
            t.entry_value = 1.0;
            t.outlier_value = 1000.0;
            g.structures = {{0, 25}};
            g.variants = {Variant::SORTED_HUBER, Variant::NON_ROBUST};
        }
        break;
    case 'd':
    case 'e':
    case 'f':
        t.kind = TruthKind::LOW_RANK;
        c.n = 1000;
        c.d1 = c.d2 = 10;
        g.reps = 50;
        if (id == 'd') {
            t.entry_value = t.outlier_value = 10.0;
            g.structures = {{1, 0}, {2, 0}, {3, 0}};
            g.variants = {Variant::SORTED_HUBER};
        } else if (id == 'e') {
            t.entry_value = t.outlier_value = 100.0;
            g.structures = {{5, 0}};
            g.variants = {Variant::SORTED_HUBER, Variant::HUBER};
        } else {
            t.entry_value = 100.0;
            t.outlier_value = 1000.0;
            g.structures = {{5, 0}};
            g.variants = {Variant::SORTED_HUBER, Variant::NON_ROBUST};
        }
        break;
    case 'g':
    case 'h':
    case 'i':
    case 'j':
    case 'k':
        t.kind = TruthKind::LOW_RANK_PLUS_SPARSE;
        c.n = 1000;
        c.d1 = c.d2 = 10;
        t.spikeness_a = 1.0;
        t.gamma_value = 10.0;
        g.reps = 20;
        if (id == 'g') {
            g.sweep = SweepKind::RANK;
            g.eps_grid = {0.0};
            for (Index s : {5, 80})
                for (Index r = 1; r <= 6; ++r)
                    g.structures.push_back({r, s});
            g.variants = {Variant::NON_ROBUST};
        } else if (id == 'h') {
            g.sweep = SweepKind::SPARSITY;
            g.eps_grid = {0.0};
            for (Index s : {5, 20, 35, 50, 65, 80})
                g.structures.push_back({5, s});
            g.variants = {Variant::NON_ROBUST};
        } else if (id == 'i') {
            t.outlier_value = 1.0;
            g.structures = {{1, 5}, {3, 5}, {5, 5}};
            g.variants = {Variant::SORTED_HUBER};
        } else {
            t.sigma = 0.1;
            t.outlier_value = 0.5;
            g.structures = {{1, 5}};
            g.variants = {Variant::SORTED_HUBER, id == 'j' ? Variant::HUBER : Variant::NON_ROBUST};
        }
        break;
    default:
        throw std::invalid_argument(std::string("unknown preset id: ") + id);
    }

    if (ov.n) c.n = *ov.n;
    if (ov.p) {
        if (!is_sparse_preset(id))
            throw std::invalid_argument("override p applies to sparse presets only");
        c.d1 = *ov.p;
    }
    if (ov.d1) c.d1 = *ov.d1;
    if (ov.d2) c.d2 = *ov.d2;
    if (ov.reps) g.reps = *ov.reps;
    if (ov.sigma) t.sigma = *ov.sigma;
    if (ov.entry_value) t.entry_value = *ov.entry_value;
    if (ov.outlier_value) t.outlier_value = *ov.outlier_value;
    if (ov.spikeness_a) t.spikeness_a = *ov.spikeness_a;
    if (ov.gamma_value) t.gamma_value = *ov.gamma_value;
    if (ov.eps_grid) g.eps_grid = *ov.eps_grid;
    if (ov.structures) g.structures = *ov.structures;
    if (ov.variants) g.variants = *ov.variants;
    for (StructurePoint& pt : g.structures) {
        if (ov.s) pt.s = *ov.s;
        if (ov.r) pt.r = *ov.r;
    }
    // Overrides of s or r may collapse the structure list.
    std::vector<StructurePoint> unique;
    for (const StructurePoint& pt : g.structures)
        if (std::find(unique.begin(), unique.end(), pt) == unique.end())
            unique.push_back(pt);
    g.structures = std::move(unique);

    if (g.reps < 1)
        throw std::invalid_argument("preset: reps must be >= 1");
    if (g.eps_grid.empty() || g.structures.empty() || g.variants.empty())
        throw std::invalid_argument("preset: empty grid");
    for (double e : g.eps_grid)
        if (!(e >= 0.0 && e <= 0.5))
            throw std::invalid_argument("preset: epsilon grid must lie in [0, 0.5]");
    for (const StructurePoint& pt : g.structures)
        c.truth_at(pt).validate(c.d1, c.d2);
    return c;
}

/// Apply desk-scale sizes, then explicit overrides.
inline PresetConfig desk_preset(char id, const PresetOverrides& ov = {}) {
    PresetOverrides merged = desk_overrides(id);
    auto take = [](auto& dst, const auto& src) {
        if (src) dst = src;
    };
    take(merged.n, ov.n);
    take(merged.p, ov.p);
    take(merged.d1, ov.d1);
    take(merged.d2, ov.d2);
    take(merged.reps, ov.reps);
    take(merged.s, ov.s);
    take(merged.r, ov.r);
    take(merged.sigma, ov.sigma);
    take(merged.entry_value, ov.entry_value);
    take(merged.outlier_value, ov.outlier_value);
    take(merged.spikeness_a, ov.spikeness_a);
    take(merged.gamma_value, ov.gamma_value);
    take(merged.eps_grid, ov.eps_grid);
    take(merged.structures, ov.structures);
    take(merged.variants, ov.variants);
    return preset(id, merged);
}

} // namespace shuber
