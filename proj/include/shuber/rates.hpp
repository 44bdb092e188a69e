#pragma once

// Rate predictors and tuning scalings. Every "asymp" in the theory hides an
// absolute constant; those constants are plain configuration here.

#include <cmath>
#include <stdexcept>
#include <string>

namespace shuber::rates {

/// eps log(1/eps), continuous at 0 and 1.
inline double omega_eps(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0))
        throw std::invalid_argument("omega_eps: epsilon must lie in [0, 1]");
    if (eps == 0.0 || eps == 1.0)
        return 0.0;
    return -eps * std::log(eps);
}

enum class Case { SPARSE_L1, SPARSE_SLOPE, TRACE, DECOMP };

inline std::string to_string(Case c) {
    switch (c) {
    case Case::SPARSE_L1: return "SPARSE_L1";
    case Case::SPARSE_SLOPE: return "SPARSE_SLOPE";
    case Case::TRACE: return "TRACE";
    case Case::DECOMP: return "DECOMP";
    }
    return "?";
}

inline Case case_from_string(const std::string& s) {
    if (s == "SPARSE_L1") return Case::SPARSE_L1;
    if (s == "SPARSE_SLOPE") return Case::SPARSE_SLOPE;
    if (s == "TRACE") return Case::TRACE;
    if (s == "DECOMP") return Case::DECOMP;
    throw std::invalid_argument("unknown rate case: " + s);
}

/// Problem dimensions; p is the sparse ambient dimension (d1 d2 for matrices).
struct Dims {
    double s = 0;
    double r = 0;
    double p = 0;
    double d1 = 0;
    double d2 = 0;
};

inline double effective_dim(Case c, const Dims& d) {
    switch (c) {
    case Case::SPARSE_L1:
        if (!(d.p >= 1) || d.s < 0)
            throw std::invalid_argument("effective_dim: need p >= 1, s >= 0");
        return d.s * std::log(d.p);
    case Case::SPARSE_SLOPE:
        if (!(d.p >= 1) || !(d.s > 0) || d.s > d.p)
            throw std::invalid_argument("effective_dim: need 0 < s <= p");
        return d.s * std::log(std::exp(1.0) * d.p / d.s);
    case Case::TRACE:
        if (!(d.d1 >= 1) || !(d.d2 >= 1) || d.r < 0)
            throw std::invalid_argument("effective_dim: need d1, d2 >= 1, r >= 0");
        return d.r * (d.d1 + d.d2);
    case Case::DECOMP: break;
    }
    throw std::invalid_argument("effective_dim: case has no single effective dimension");
}

namespace detail {
inline void check_common(double n, double delta) {
    if (!(n >= 1))
        throw std::invalid_argument("rate: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("rate: delta must lie in (0, 1)");
}
inline double confidence_term(double n, double delta, double lip) {
    return lip * (1.0 + std::sqrt(std::log(1.0 / delta))) / std::sqrt(n);
}
} // namespace detail

/// L (1 + sqrt(log(1/delta))) / sqrt(n) + L^2 rho mu sqrt(d_eff / n).
inline double rate_single(double n, double d_eff, double delta, double rho, double mu, double lip) {
    detail::check_common(n, delta);
    if (d_eff < 0)
        throw std::invalid_argument("rate_single: d_eff must be nonnegative");
    return detail::confidence_term(n, delta, lip) + lip * lip * rho * mu * std::sqrt(d_eff / n);
}

struct DecompRateInput {
    double n = 1;
    double r = 0;
    double s = 0;
    double delta = 0.5;
    double a_star = 0;
    double c1 = 1;
    double lip = 1;
    double sigma = 1;
    double d1 = 1;
    double d2 = 1;
    /// Ambient dimension of the sparse part; 0 means d1 d2.
    double p = 0;
};

/// Rate of robust trace regression with additive decomposition:
/// L(1 + sqrt(log 1/delta))/sqrt(n) + L^2 [sqrt(r(d1+d2)/n) + sqrt(s log p/n)]
///   + (1 + 1/(C1 sigma L)) a* sqrt(s/n).
inline double rate_decomp(const DecompRateInput& in) {
    detail::check_common(in.n, in.delta);
    if (!(in.sigma * in.lip > 0.0) || !(in.c1 > 0.0))
        throw std::invalid_argument("rate_decomp: need sigma L > 0 and C1 > 0");
    if (in.r < 0 || in.s < 0 || in.a_star < 0)
        throw std::invalid_argument("rate_decomp: r, s, a* must be nonnegative");
    const double p = in.p > 0 ? in.p : in.d1 * in.d2;
    const double structure = std::sqrt(in.r * (in.d1 + in.d2) / in.n) + std::sqrt(in.s * std::log(p) / in.n);
    return detail::confidence_term(in.n, in.delta, in.lip) + in.lip * in.lip * structure +
           (1.0 + 1.0 / (in.c1 * in.sigma * in.lip)) * in.a_star * std::sqrt(in.s / in.n);
}

struct TuningConstants {
    double c_lambda = 2.0;
    double c_chi = 2.0;
    double c_tau = 2.0;
    double lip = 1.0;
    double c1 = 1.0;
    /// rho_1(Sigma) for sparse cases, rho_N(Sigma) for trace cases.
    double rho = 1.0;
};

struct TuningDefaults {
    double lambda = 0;
    double chi = 0;
    double tau = 0;
    TuningConstants constants;
    double sigma_guess = 0;
};

struct TuningInput {
    Case c = Case::SPARSE_SLOPE;
    /// 1 or 2: the data-fit exponent.
    int q = 2;
    double n = 1;
    Dims dims;
    double sigma = 1;
    /// a* of the spikeness bound (decomposition).
    double a_star = 0;
};

/// Theory-driven tuning. For q = 2:
///   lambda = c sigma L^2 rho sqrt(log p / n)      (sparse, l1)
///            c sigma L^2 rho / sqrt(n)            (sparse, Slope)
///            c sigma L^2 rho sqrt((d1 + d2) / n)  (trace, decomposition)
///   chi    = c sigma L^2 sqrt(log p / n) + a* / sqrt(n)
///   tau    = c C1 L^2 sigma / sqrt(n)
/// For q = 1 the same shapes with sigma removed and L^2 replaced by L.
inline TuningDefaults default_tuning(const TuningInput& in, const TuningConstants& k = {}) {
    if (!(in.n >= 1))
        throw std::invalid_argument("default_tuning: n must be >= 1");
    if (in.q != 1 && in.q != 2)
        throw std::invalid_argument("default_tuning: q must be 1 or 2");
    if (in.q == 2 && !(in.sigma > 0.0))
        throw std::invalid_argument("default_tuning: sigma must be positive for q = 2");
    if (!(k.lip >= 1.0))
        throw std::invalid_argument("default_tuning: L must be >= 1");
    const double sqrt_n = std::sqrt(in.n);
    const double scale = in.q == 2 ? in.sigma * k.lip * k.lip : k.lip;
    const double p = in.c == Case::TRACE || in.c == Case::DECOMP ? in.dims.d1 * in.dims.d2 : in.dims.p;
    if (!(p >= 2))
        throw std::invalid_argument("default_tuning: ambient dimension must be >= 2");

    TuningDefaults out;
    out.constants = k;
    out.sigma_guess = in.sigma;
    switch (in.c) {
    case Case::SPARSE_L1: out.lambda = k.c_lambda * scale * k.rho * std::sqrt(std::log(p) / in.n); break;
    case Case::SPARSE_SLOPE: out.lambda = k.c_lambda * scale * k.rho / sqrt_n; break;
    case Case::TRACE:
    case Case::DECOMP:
        out.lambda = k.c_lambda * scale * k.rho * std::sqrt((in.dims.d1 + in.dims.d2) / in.n);
        break;
    }
    out.chi = k.c_chi * scale * std::sqrt(std::log(p) / in.n) + in.a_star / sqrt_n;
    out.tau = in.q == 2 ? k.c_tau * k.c1 * scale / sqrt_n : k.c_tau * scale / sqrt_n;
    return out;
}

} // namespace shuber::rates
