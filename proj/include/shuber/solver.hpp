#pragma once

#include "shuber/dataset.hpp"
#include "shuber/prox.hpp"
#include "shuber/subdifferential.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace shuber {

/// Estimator family.
///  - DECOMP_Q2: 1/2 ||u + theta||^2 + lambda ||B||_N + chi ||Gamma||_1 + tau ||theta||_w,
///               subject to ||B||_inf <= box_a;
///  - SINGLE_Q2: 1/2 ||u + theta||^2 + lambda R(B) + tau ||theta||_w;
///  - SINGLE_Q1: ||u + theta||_2 + lambda R(B) + tau ||theta||_w;
/// where u = (y - X(B + Gamma)) / sqrt(n).
enum class Mode { DECOMP_Q2, SINGLE_Q2, SINGLE_Q1 };

inline std::string to_string(Mode m) {
    switch (m) {
    case Mode::DECOMP_Q2: return "DECOMP_Q2";
    case Mode::SINGLE_Q2: return "SINGLE_Q2";
    case Mode::SINGLE_Q1: return "SINGLE_Q1";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "DECOMP_Q2") return Mode::DECOMP_Q2;
    if (s == "SINGLE_Q2") return Mode::SINGLE_Q2;
    if (s == "SINGLE_Q1") return Mode::SINGLE_Q1;
    throw std::invalid_argument("unknown mode: " + s);
}

struct Problem {
    Mode mode = Mode::SINGLE_Q2;
    /// Penalty on B: NUCLEAR, L1 or SLOPE_P.
    NormTag regularizer = NormTag::L1;
    double lambda = 0.0;
    double chi = 0.0;
    /// tau = 0 freezes theta at zero (non-robust fit).
    double tau = 0.0;
    double box_a = kUnbounded;
    /// Slope weights on theta (length n).
    WeightSequence theta_weights;
    /// Slope weights on B when regularizer = SLOPE_P (length d1 d2).
    WeightSequence reg_weights;

    void validate(const Dataset& data) const {
        data.validate();
        if (!(lambda >= 0.0) || !(chi >= 0.0) || !(tau >= 0.0))
            throw std::invalid_argument("Problem: lambda, chi and tau must be nonnegative");
        if (!std::isfinite(lambda) || !std::isfinite(chi) || !std::isfinite(tau))
            throw std::invalid_argument("Problem: tuning parameters must be finite");
        if (regularizer != NormTag::NUCLEAR && regularizer != NormTag::L1 && regularizer != NormTag::SLOPE_P)
            throw std::invalid_argument("Problem: regularizer must be NUCLEAR, L1 or SLOPE_P");
        if (mode == Mode::DECOMP_Q2) {
            if (regularizer != NormTag::NUCLEAR)
                throw std::invalid_argument("Problem: DECOMP_Q2 requires the nuclear norm on B");
            if (!(box_a > 0.0))
                throw std::invalid_argument("Problem: box bound must be positive or infinite");
        }
        if (tau > 0.0 && theta_weights.size() != data.n())
            throw std::invalid_argument("Problem: theta weights must have length n");
        if (regularizer == NormTag::SLOPE_P && reg_weights.size() != data.p())
            throw std::invalid_argument("Problem: Slope weights on B must have length d1 d2");
    }

    bool decomposition() const { return mode == Mode::DECOMP_Q2; }
    double effective_box() const { return decomposition() ? box_a : kUnbounded; }
};

struct EstimateTriple {
    Matrix b_hat;
    Matrix gamma_hat;
    Vector theta_hat;

    static EstimateTriple zeros(const Dataset& data) {
        return {Matrix::Zero(data.d1, data.d2), Matrix::Zero(data.d1, data.d2), Vector::Zero(data.n())};
    }
};

enum class StepRule { FIXED_LIPSCHITZ, BACKTRACKING };

/// How the box-constrained nuclear prox of the B block is evaluated.
enum class BoxProx {
    /// Singular value thresholding then entrywise clipping (one pass).
    SVT_THEN_CLIP,
    /// The exact prox of the nuclear norm plus box indicator.
    EXACT,
};

struct SolverOptions {
    // Slow cases at desk scale (heavy contamination, dense truth) need ~9000.
    int max_sweeps = 20000;
    double tol_rel_obj = 1e-8;
    double tol_kkt = 1e-6;
    StepRule step_rule = StepRule::FIXED_LIPSCHITZ;
    BoxProx box_prox = BoxProx::EXACT;
    BoxProxOptions box_options;
    int power_iterations = 50;
    double power_tolerance = 1e-8;
    double backtrack_factor = 0.5;
    double sufficient_decrease = 1e-4;
    /// Relative objective increase per sweep tolerated before switching to
    /// backtracking.
    double monotone_slack = 1e-10;

    void validate() const {
        if (max_sweeps < 1)
            throw std::invalid_argument("SolverOptions: max_sweeps must be >= 1");
        if (!(tol_rel_obj > 0.0) || !(tol_kkt > 0.0))
            throw std::invalid_argument("SolverOptions: tolerances must be positive");
    }
};

struct SolverReport {
    std::vector<double> objective_trace;
    int sweeps_used = 0;
    double kkt_residual = 0.0;
    bool converged = false;
    double wall_time_s = 0.0;
    double lipschitz = 0.0;
    std::string diagnostic;
};

namespace detail {

inline double sqrt_n(const Dataset& data) { return std::sqrt(static_cast<double>(data.n())); }

/// (y - X(b + g)) / sqrt(n)
inline Vector scaled_residual(const Dataset& data, const Vector& b, const Vector& g) {
    return (data.y - data.x * (b + g)) / sqrt_n(data);
}

inline double penalty_b(const Problem& pb, const Dataset& data, const Vector& b) {
    if (pb.lambda == 0.0)
        return 0.0;
    switch (pb.regularizer) {
    case NormTag::L1: return pb.lambda * b.lpNorm<1>();
    case NormTag::SLOPE_P: return pb.lambda * slope_norm(b, pb.reg_weights);
    case NormTag::NUCLEAR: return pb.lambda * matrix_norm(unflatten(b, data.d1, data.d2), NormTag::NUCLEAR);
    default: break;
    }
    throw std::invalid_argument("unsupported regularizer");
}

/// Evaluated in long double and rounded once. With outliers around 1e3 the
/// residual is large enough that double rounding alone moves the data term
/// by ~1e-8 between nearly equal iterates, which would hide real decrease.
inline double objective_flat(const Dataset& data, const Problem& pb, const Vector& b, const Vector& g,
                             const Vector& theta) {
    using Wide = long double;
    const Index n = data.n();
    std::vector<Wide> r(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] = data.y[i];
    auto subtract = [&](const Vector& v) {
        for (Index j = 0; j < data.p(); ++j) {
            const Wide vj = v[j];
            if (vj == 0.0L)
                continue;
            for (Index i = 0; i < n; ++i)
                r[static_cast<std::size_t>(i)] -= static_cast<Wide>(data.x(i, j)) * vj;
        }
    };
    subtract(b);
    if (pb.decomposition())
        subtract(g);
    const Wide root_n = std::sqrt(static_cast<Wide>(n));
    Wide sq = 0.0L;
    for (Index i = 0; i < n; ++i) {
        const Wide z = r[static_cast<std::size_t>(i)] / root_n + static_cast<Wide>(theta[i]);
        sq += z * z;
    }
    Wide value = pb.mode == Mode::SINGLE_Q1 ? std::sqrt(sq) : 0.5L * sq;
    value += penalty_b(pb, data, b);
    if (pb.decomposition() && pb.chi > 0.0)
        value += static_cast<Wide>(pb.chi) * g.lpNorm<1>();
    if (pb.tau > 0.0)
        value += static_cast<Wide>(pb.tau) * slope_norm(theta, pb.theta_weights);
    return static_cast<double>(value);
}

/// Largest eigenvalue of X^T X / n by power iteration.
inline double lipschitz_estimate(const Dataset& data, int iterations, double tolerance) {
    const Index p = data.p();
    Vector v = Vector::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
    const double inv_n = 1.0 / static_cast<double>(data.n());
    double est = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Vector w = data.x.transpose() * (data.x * v) * inv_n;
        const double rayleigh = v.dot(w);
        const double norm = w.norm();
        if (!std::isfinite(norm))
            throw std::runtime_error("power iteration produced a non-finite value");
        if (norm == 0.0)
            return 0.0;
        v = w / norm;
        const double prev = est;
        est = std::max(norm, rayleigh);
        if (it > 0 && std::abs(est - prev) <= tolerance * est)
            break;
    }
    return est;
}


} // namespace detail

inline double objective(const Dataset& data, const Problem& pb, const EstimateTriple& est) {
    pb.validate(data);
    if (est.b_hat.rows() != data.d1 || est.b_hat.cols() != data.d2 || est.theta_hat.size() != data.n() ||
        est.gamma_hat.rows() != data.d1 || est.gamma_hat.cols() != data.d2)
        throw std::invalid_argument("objective: estimate shape does not match data");
    const Vector g = pb.decomposition() ? flatten(est.gamma_hat) : Vector::Zero(data.p());
    const Vector theta = pb.tau > 0.0 ? est.theta_hat : Vector::Zero(data.n());
    return detail::objective_flat(data, pb, flatten(est.b_hat), g, theta);
}

namespace detail {

/// Per-block first-order residuals, each normalized by (1 + ||gradient||).
/// `good_enough` > 0 lets the box cone search stop once its normalized bound
/// falls below that level (the result stays an upper bound).
inline double kkt_flat(const Dataset& data, const Problem& pb, const Vector& b, const Vector& g,
                       const Vector& theta, double good_enough = 0.0, int cone_iterations = 3000) {
    const Vector z = scaled_residual(data, b, g) + theta;
    double scale = 1.0;
    if (pb.mode == Mode::SINGLE_Q1) {
        const double s_min = 1e-8 * data.y.norm() / sqrt_n(data);
        scale = 1.0 / std::max({z.norm(), s_min, std::numeric_limits<double>::min()});
    }
    const Vector grad_theta = scale * z;
    const Vector grad_b = -scale * data.adjoint_flat(z) / sqrt_n(data);

    double worst = 0.0;
    if (pb.tau > 0.0) {
        const double d = slope_subdiff_distance(theta, -grad_theta, (pb.tau * pb.theta_weights.values()).eval());
        worst = std::max(worst, d / (1.0 + grad_theta.norm()));
    }
    double db = 0.0;
    switch (pb.regularizer) {
    case NormTag::L1: db = l1_subdiff_distance(b, -grad_b, pb.lambda); break;
    case NormTag::SLOPE_P:
        db = pb.lambda == 0.0 ? grad_b.norm()
                              : slope_subdiff_distance(b, -grad_b, (pb.lambda * pb.reg_weights.values()).eval());
        break;
    case NormTag::NUCLEAR: {
        ConeSearchOptions cone;
        cone.good_enough = good_enough * (1.0 + grad_b.norm());
        cone.max_iterations = cone_iterations;
        db = nuclear_box_subdiff_distance(unflatten(b, data.d1, data.d2), unflatten(-grad_b, data.d1, data.d2),
                                          pb.lambda, pb.effective_box(), cone);
        break;
    }
    default: throw std::invalid_argument("unsupported regularizer");
    }
    worst = std::max(worst, db / (1.0 + grad_b.norm()));
    if (pb.decomposition())
        worst = std::max(worst, l1_subdiff_distance(g, -grad_b, pb.chi) / (1.0 + grad_b.norm()));
    return worst;
}

} // namespace detail

/// Largest normalized distance from minus a block gradient to the block's
/// penalty subdifferential (with the box normal cone in DECOMP mode).
inline double kkt_residual(const Dataset& data, const Problem& pb, const EstimateTriple& est) {
    pb.validate(data);
    const Vector g = pb.decomposition() ? flatten(est.gamma_hat) : Vector::Zero(data.p());
    const Vector theta = pb.tau > 0.0 ? est.theta_hat : Vector::Zero(data.n());
    return detail::kkt_flat(data, pb, flatten(est.b_hat), g, theta);
}

namespace detail {

class BlockSolver {
public:
    BlockSolver(const Dataset& data, const Problem& pb, const SolverOptions& opts)
        : data_(data), pb_(pb), opts_(opts), rule_(opts.step_rule), sqrt_n_(sqrt_n(data)) {
        lipschitz_ = lipschitz_estimate(data, opts.power_iterations, opts.power_tolerance);
        if (lipschitz_ == 0.0)
            lipschitz_ = 1.0;
        step_b_ = step_g_ = 1.0 / lipschitz_;
        s_min_ = std::max(1e-8 * data.y.norm() / sqrt_n_, std::numeric_limits<double>::min());
    }

    double lipschitz() const { return lipschitz_; }

    void load(const EstimateTriple& init) {
        b_ = flatten(init.b_hat);
        g_ = pb_.decomposition() ? flatten(init.gamma_hat) : Vector::Zero(data_.p());
        theta_ = pb_.tau > 0.0 ? init.theta_hat : Vector::Zero(data_.n());
        if (pb_.decomposition() && std::isfinite(pb_.box_a))
            b_ = b_.cwiseMax(-pb_.box_a).cwiseMin(pb_.box_a);
        refresh_residual();
    }

    EstimateTriple estimate() const {
        return {unflatten(b_, data_.d1, data_.d2), unflatten(g_, data_.d1, data_.d2), theta_};
    }

    double objective() const { return objective_flat(data_, pb_, b_, g_, theta_); }
    /// `quick` caps the box cone search for in-loop stopping checks.
    double kkt(bool quick = false) const {
        return kkt_flat(data_, pb_, b_, g_, theta_, 0.1 * opts_.tol_kkt, quick ? 300 : 3000);
    }

    /// One cyclic pass theta -> B -> Gamma.
    void sweep() {
        // the block steps update u_ incrementally; resync so drift cannot
        // turn into a rounding-level objective increase
        refresh_residual();
        if (pb_.tau > 0.0) {
            const double weight = quadratic_weight();
            theta_ = prox_sorted_l1(-u_, (weight * pb_.tau * pb_.theta_weights.values()).eval());
        }
        update_b();
        if (pb_.decomposition())
            update_gamma();
    }

    struct State {
        Vector b, g, theta;
        double step_b, step_g;
    };
    State save() const { return {b_, g_, theta_, step_b_, step_g_}; }
    void restore(const State& s) {
        b_ = s.b;
        g_ = s.g;
        theta_ = s.theta;
        step_b_ = s.step_b;
        step_g_ = s.step_g;
        refresh_residual();
    }
    void use_backtracking() { rule_ = StepRule::BACKTRACKING; }
    StepRule rule() const { return rule_; }

private:
    void refresh_residual() { u_ = scaled_residual(data_, b_, g_); }

    // The data term in the current block step is (1 / (2 s)) ||u + theta||^2:
    // s = 1 for q = 2, and s = ||u + theta|| (majorizer of the norm) for q = 1.
    double quadratic_weight() const {
        if (pb_.mode != Mode::SINGLE_Q1)
            return 1.0;
        return std::max((u_ + theta_).norm(), s_min_);
    }

    double smooth_value(const Vector& z, double s) const { return 0.5 * z.squaredNorm() / s; }

    Vector prox_b(const Vector& v, double step) {
        const double eta = step * pb_.lambda;
        if (eta == 0.0) {
            if (pb_.regularizer == NormTag::NUCLEAR && pb_.decomposition() && std::isfinite(pb_.box_a))
                return v.cwiseMax(-pb_.box_a).cwiseMin(pb_.box_a);
            return v;
        }
        switch (pb_.regularizer) {
        case NormTag::L1: return prox_soft_threshold(v, eta);
        case NormTag::SLOPE_P: return prox_sorted_l1(v, (eta * pb_.reg_weights.values()).eval());
        case NormTag::NUCLEAR: {
            const Matrix m = unflatten(v, data_.d1, data_.d2);
            const double a = pb_.effective_box();
            const Matrix out = (opts_.box_prox == BoxProx::EXACT)
                                   ? prox_nuclear_box_exact(m, eta, a, opts_.box_options, &box_multiplier_)
                                   : prox_nuclear_box(m, eta, a);
            return flatten(out);
        }
        default: break;
        }
        throw std::invalid_argument("unsupported regularizer");
    }

    /// Proximal gradient step on one of the two design blocks; `x` is b_ or g_.
    template <class Prox>
    void block_step(Vector& x, double& step, Prox&& prox) {
        const double s = quadratic_weight();
        const Vector z = u_ + theta_;
        const Vector grad = -data_.adjoint_flat(z) / (sqrt_n_ * s);
        double t = (rule_ == StepRule::FIXED_LIPSCHITZ) ? s / lipschitz_ : step;
        const double f0 = smooth_value(z, s);
        for (int attempt = 0;; ++attempt) {
            Vector cand = prox(Vector(x - t * grad), t);
            const Vector delta = cand - x;
            const Vector u_new = u_ - data_.apply_flat(delta) / sqrt_n_;
            if (rule_ == StepRule::FIXED_LIPSCHITZ) {
                x = std::move(cand);
                u_ = u_new;
                return;
            }
            const double f1 = smooth_value(u_new + theta_, s);
            const double model = f0 + grad.dot(delta) + (1.0 - opts_.sufficient_decrease) * delta.squaredNorm() / (2.0 * t);
            if (f1 <= model || attempt >= 60) {
                x = std::move(cand);
                u_ = u_new;
                step = t;
                return;
            }
            t *= opts_.backtrack_factor;
        }
    }

    void update_b() {
        block_step(b_, step_b_, [this](const Vector& v, double t) { return prox_b(v, t); });
    }

    void update_gamma() {
        const double chi = pb_.chi;
        block_step(g_, step_g_, [chi](const Vector& v, double t) { return prox_soft_threshold(v, t * chi); });
    }

    const Dataset& data_;
    const Problem& pb_;
    const SolverOptions& opts_;
    StepRule rule_;
    double sqrt_n_;
    double lipschitz_ = 1.0;
    double step_b_ = 1.0, step_g_ = 1.0;
    double s_min_ = 0.0;
    Vector b_, g_, theta_, u_;
    // Box multiplier of the last exact prox, reused as a warm start.
    Matrix box_multiplier_;
};

} // namespace detail

/// Block-alternating proximal gradient over (theta, B, Gamma).
///
/// theta is minimized exactly (Slope prox of the negated residual); B and
/// Gamma take proximal gradient steps of length 1/L with L the top
/// eigenvalue of X^T X / n. For SINGLE_Q1 each block minimizes the quadratic
/// majorizer (s + ||r||^2 / s) / 2 at s = ||r||, which keeps the trace
/// monotone. Divergence is reported through the returned report.
inline std::pair<EstimateTriple, SolverReport> fit(const Dataset& data, const Problem& pb,
                                                   const SolverOptions& opts = {},
                                                   const std::optional<EstimateTriple>& init = std::nullopt) {
    const auto start = std::chrono::steady_clock::now();
    pb.validate(data);
    opts.validate();
    SolverReport report;
    detail::BlockSolver solver(data, pb, opts);
    report.lipschitz = solver.lipschitz();
    const EstimateTriple first = init ? *init : EstimateTriple::zeros(data);
    if (first.b_hat.rows() != data.d1 || first.b_hat.cols() != data.d2 || first.theta_hat.size() != data.n())
        throw std::invalid_argument("fit: initial estimate shape does not match data");
    solver.load(first);

    double prev = solver.objective();
    if (!std::isfinite(prev))
        throw std::invalid_argument("fit: objective at the initial point is not finite");
    int kkt_wait = 0;
    int next_kkt_check = 0;
    bool diverged = false;
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        const auto saved = solver.save();
        solver.sweep();
        double value = solver.objective();
        if (value > prev + opts.monotone_slack * std::max(1.0, std::abs(prev)) &&
            solver.rule() == StepRule::FIXED_LIPSCHITZ) {
            solver.restore(saved);
            solver.use_backtracking();
            solver.sweep();
            value = solver.objective();
        }
        report.sweeps_used = sweep;
        if (!std::isfinite(value)) {
            report.diagnostic = "objective became non-finite at sweep " + std::to_string(sweep);
            report.objective_trace.push_back(value);
            diverged = true;
            break;
        }
        report.objective_trace.push_back(value);
        const double rel = (prev - value) / std::max(std::abs(prev), std::numeric_limits<double>::min());
        prev = value;
        if (rel < opts.tol_rel_obj && sweep >= next_kkt_check) {
            const double kkt = solver.kkt(true);
            if (kkt < opts.tol_kkt) {
                report.converged = true;
                break;
            }
            kkt_wait = std::min(std::max(1, 2 * kkt_wait), 32);
            next_kkt_check = sweep + kkt_wait;
        }
    }
    EstimateTriple est = solver.estimate();
    report.kkt_residual = !diverged ? solver.kkt() : std::numeric_limits<double>::infinity();
    if (report.converged && !(report.kkt_residual < opts.tol_kkt))
        report.converged = false;
    if (!report.converged && report.diagnostic.empty())
        report.diagnostic = "stopping rule not met within max_sweeps";
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(est), std::move(report)};
}

} // namespace shuber
