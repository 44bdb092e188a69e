// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--out DIR]
//
// Experiment outputs (results.csv, curves.csv, ...) land in DIR for auditing.

#include "shuber/experiment.hpp"
#include "shuber/oracle.hpp"
#include "shuber/prox.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace shuber;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

Vector gaussian(std::mt19937_64& gen, Index m, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    Vector v(m);
    for (Index i = 0; i < m; ++i)
        v[i] = nd(gen);
    return v;
}

Vector random_weights(std::mt19937_64& gen, Index m) {
    Vector w = gaussian(gen, m, 1.0).cwiseAbs();
    std::sort(w.data(), w.data() + m, std::greater<>());
    w.array() += 1e-2;
    return w;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Every experiment run by this binary; criterion 3 audits all of them.
std::vector<ExperimentResult>& all_runs() {
    static std::vector<ExperimentResult> runs;
    return runs;
}

ExperimentResult run_and_write(const fs::path& out, const std::string& name, const ExperimentConfig& cfg) {
    const auto start = Clock::now();
    ExperimentResult res = run_experiment(cfg);
    all_runs().push_back(res);
    write_experiment(out / name, cfg, res);
    std::printf("  [run %-12s %5zu fits, %7.1f s]\n", name.c_str(), res.rows.size(), seconds_since(start));
    std::fflush(stdout);
    return res;
}

ExperimentConfig desk_config(char id) {
    ExperimentConfig cfg;
    cfg.preset_id = id;
    cfg.desk = true;
    cfg.workers = 0;
    return cfg;
}

const CurvePoint* find_curve(const ExperimentResult& res, Variant v, double eps, Index r, Index s) {
    for (const CurvePoint& c : res.curves)
        if (c.variant == v && c.epsilon == eps && c.r == r && c.s == s)
            return &c;
    return nullptr;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// R^2 of the least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const double rho = pearson(x, y);
    return rho * rho;
}

double mean_rmse(const ExperimentResult& res) {
    double total = 0.0;
    for (const MetricRow& row : res.rows)
        total += *row.rmse_total;
    return total / static_cast<double>(res.rows.size());
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
    const auto start = Clock::now();
    std::mt19937_64 gen(101);
    double worst_exhaustive = 0.0;
    for (Index m = 2; m <= 6; ++m) {
        for (int t = 0; t < 1000; ++t) {
            const Vector v = gaussian(gen, m, 2.0);
            const Vector w = random_weights(gen, m);
            const Vector x = prox_sorted_l1(v, w);
            const oracle::OracleResult ref = oracle::brute_prox_slope(v, w, oracle::Method::EXHAUSTIVE_PATTERN);
            worst_exhaustive = std::max(worst_exhaustive, (x - ref.argmin).lpNorm<Eigen::Infinity>());
        }
    }
    int outside = 0;
    for (Index m : {10, 50}) {
        for (int t = 0; t < 200; ++t) {
            const Vector v = gaussian(gen, m, 2.0);
            const Vector w = random_weights(gen, m);
            const Vector x = prox_sorted_l1(v, w);
            const oracle::OracleResult sg = oracle::brute_prox_slope(v, w, oracle::Method::PROJECTED_SUBGRADIENT);
            const double ours = oracle::detail::prox_objective(x, v, w);
            const double round = 1e-12 * (1.0 + std::abs(sg.value));
            // the oracle brackets the optimum in [value - gap, value]
            const double excess = std::max({ours - sg.value - round, sg.value - sg.certified_gap - ours - round,
                                            (x - sg.argmin).norm() - std::sqrt(2.0 * sg.certified_gap) - 1e-9});
            if (excess > 0.0)
                ++outside;
        }
    }
    const double elapsed = seconds_since(start);
    Verdict v;
    v.pass = worst_exhaustive <= 1e-8 && outside == 0 && elapsed < 60.0;
    v.detail = fmt("exhaustive max linf %.3g (tol 1e-8); subgradient outside gap %g/400; %.1f s (< 60 s)",
                   worst_exhaustive, outside, elapsed);
    return v;
}

Verdict criterion2() {
    std::mt19937_64 gen(202);
    std::uniform_real_distribution<double> tau_dist(0.05, 5.0);
    auto phi = [](double t) { return std::abs(t) <= 1.0 ? 0.5 * t * t : std::abs(t) - 0.5; };
    double worst = 0.0;
    auto check = [&](const Vector& u, double tau) {
        const double got = sorted_huber_q2(u, WeightSequence::constant(u.size(), 1.0), tau).value;
        double expect = 0.0;
        for (Index i = 0; i < u.size(); ++i)
            expect += tau * tau * phi(u[i] / tau);
        worst = std::max(worst, std::abs(got - expect) / std::abs(expect));
    };
    for (int t = 0; t < 10000; ++t)
        check(gaussian(gen, 1, 3.0), tau_dist(gen));
    for (int t = 0; t < 1000; ++t)
        check(gaussian(gen, 1 + t % 100, 3.0), tau_dist(gen));
    Verdict v;
    v.pass = worst <= 1e-10;
    v.detail = fmt("max relative error %.3g over 1e4 scalars and 1e3 vectors (tol 1e-10)", worst);
    return v;
}

Verdict criterion3(const std::vector<ExperimentResult>& runs) {
    std::size_t fits = 0, nonmonotone = 0, bad_kkt = 0;
    double worst_increase = -std::numeric_limits<double>::infinity(), worst_kkt = 0.0;
    for (const ExperimentResult& res : runs) {
        for (const MetricRow& row : res.rows) {
            ++fits;
            worst_increase = std::max(worst_increase, row.max_increase);
            if (!(row.max_increase <= 1e-10))
                ++nonmonotone;
            worst_kkt = std::max(worst_kkt, row.kkt);
            if (!(row.kkt <= 1e-6))
                ++bad_kkt;
        }
    }

    // tau -> infinity: theta stays at zero and the fit is the lasso
    GroundTruthSpec spec;
    spec.kind = TruthKind::SPARSE_VECTOR;
    spec.s = 5;
    spec.entry_value = 2.0;
    spec.outlier_value = 5.0;
    const Dataset sd = generate_dataset(spec, 400, 100, 1, 0.0, 303);
    Problem lasso;
    lasso.mode = Mode::SINGLE_Q2;
    lasso.regularizer = NormTag::L1;
    lasso.lambda = 2.0 * std::sqrt(std::log(100.0) / 400.0);
    lasso.tau = 1e8;
    lasso.theta_weights = WeightSequence::logarithmic(sd.n());
    const double fit_obj = objective(sd, lasso, fit(sd, lasso).first);
    const double cd_obj = oracle::lasso_coordinate_descent(sd.x, sd.y, lasso.lambda).value;
    const double lasso_gap = std::abs(fit_obj - cd_obj);

    // noiseless, uncontaminated, n >> p
    spec.s = 20;
    Dataset ls = generate_dataset(spec, 2000, 20, 1, 0.0, 304);
    const Vector b_star = flatten(ls.truth->b_star);
    ls.y = ls.x * b_star;
    Problem plain;
    plain.mode = Mode::SINGLE_Q2;
    plain.regularizer = NormTag::L1;
    const Vector b_hat = flatten(fit(ls, plain).first.b_hat);
    const Vector dense = oracle::dense_least_squares(ls.x, ls.y).argmin;
    const double rel = (b_hat - dense).norm() / dense.norm();

    Verdict v;
    v.pass = nonmonotone == 0 && bad_kkt == 0 && lasso_gap <= 1e-6 && rel <= 1e-4;
    v.detail = fmt("%g desk fits: max trace increase %.3g (slack 1e-10), max kkt %.3g (tol 1e-6); ",
                   static_cast<double>(fits), worst_increase, worst_kkt) +
               fmt("lasso objective gap %.3g (tol 1e-6); LS relative error %.3g (tol 1e-4)", lasso_gap, rel);
    if (nonmonotone + bad_kkt > 0)
        v.detail += fmt(" [%g nonmonotone, %g kkt failures]", static_cast<double>(nonmonotone),
                        static_cast<double>(bad_kkt));
    return v;
}

ExperimentConfig huber_trend_config() {
    ExperimentConfig cfg = desk_config('b');
    cfg.overrides.s = 10;
    cfg.overrides.entry_value = 50.0;
    cfg.overrides.outlier_value = 50.0;
    cfg.overrides.reps = 20;
    cfg.overrides.eps_grid = default_eps_grid();
    return cfg;
}

Verdict criterion4(const ExperimentResult& res, double elapsed) {
    Verdict v;
    std::string shortfall;
    double base_sorted = 0.0, base_huber = 0.0, worst_growth = 0.0;
    for (double eps : res.config.grid.eps_grid) {
        const CurvePoint* sorted = find_curve(res, Variant::SORTED_HUBER, eps, 0, 10);
        const CurvePoint* huber = find_curve(res, Variant::HUBER, eps, 0, 10);
        if (!sorted || !huber) {
            v.pass = false;
            v.detail = "missing curve point";
            return v;
        }
        if (eps == 0.0) {
            base_sorted = sorted->mean_rmse;
            base_huber = huber->mean_rmse;
        }
        worst_growth = std::max({worst_growth, sorted->mean_rmse / base_sorted, huber->mean_rmse / base_huber});
        if (eps >= 0.10 - 1e-12 && sorted->mean_rmse > huber->mean_rmse) {
            v.pass = false;
            shortfall += fmt(" eps=%.2f sorted %.4g > huber %.4g;", eps, sorted->mean_rmse, huber->mean_rmse);
        }
    }
    v.pass = v.pass && worst_growth <= 5.0 && elapsed <= 900.0;
    std::string table;
    for (double eps : res.config.grid.eps_grid)
        table += fmt(" %.2f:%.3g/%.3g", eps, find_curve(res, Variant::SORTED_HUBER, eps, 0, 10)->mean_rmse,
                     find_curve(res, Variant::HUBER, eps, 0, 10)->mean_rmse);
    v.detail = "mean rmse sorted/huber" + table + fmt("; max growth vs eps=0 %.3g (<= 5); %.1f s (<= 900 s)",
                                                     worst_growth, elapsed) + shortfall;
    return v;
}

Verdict criterion5(const ExperimentResult& res) {
    std::vector<double> eps, rmse;
    for (const CurvePoint& c : res.curves) {
        if (c.variant == Variant::SORTED_HUBER && c.epsilon <= 0.3 + 1e-12) {
            eps.push_back(c.epsilon);
            rmse.push_back(c.mean_rmse);
        }
    }
    const double r2 = r_squared(eps, rmse);
    Verdict v;
    v.pass = r2 >= 0.85;
    v.detail = fmt("R^2 of linear fit, sorted Huber mean rmse vs eps: %.4f (>= 0.85)", r2);
    return v;
}

Verdict criterion6(const ExperimentResult& res) {
    const StructurePoint pt = res.config.grid.structures.at(0);
    const CurvePoint* robust = find_curve(res, Variant::SORTED_HUBER, 0.2, pt.r, pt.s);
    const CurvePoint* plain = find_curve(res, Variant::NON_ROBUST, 0.2, pt.r, pt.s);
    Verdict v;
    if (!robust || !plain) {
        v.pass = false;
        v.detail = "missing curve point at eps=0.2";
        return v;
    }
    const double ratio = plain->mean_rmse / robust->mean_rmse;
    v.pass = ratio >= 3.0;
    v.detail = fmt("eps=0.2 mean rmse non-robust %.4g / sorted Huber %.4g = %.3g (>= 3)", plain->mean_rmse,
                   robust->mean_rmse, ratio);
    return v;
}

Verdict criterion7(const ExperimentResult& g, const ExperimentResult& h) {
    Verdict v;
    auto curve = [](const ExperimentResult& res, const std::function<bool(const CurvePoint&)>& keep,
                    const std::function<double(const CurvePoint&)>& x_of) {
        std::vector<double> x, y;
        for (const CurvePoint& c : res.curves) {
            if (c.variant == Variant::NON_ROBUST && c.epsilon == 0.0 && keep(c)) {
                x.push_back(x_of(c));
                y.push_back(c.mean_mse);
            }
        }
        return std::make_pair(x, y);
    };
    std::vector<Index> fixed_s;
    for (const StructurePoint& pt : g.config.grid.structures)
        if (std::find(fixed_s.begin(), fixed_s.end(), pt.s) == fixed_s.end())
            fixed_s.push_back(pt.s);
    for (Index s : fixed_s) {
        auto [x, y] = curve(g, [s](const CurvePoint& c) { return c.s == s; },
                            [](const CurvePoint& c) { return static_cast<double>(c.r); });
        const double rho = pearson(x, y);
        v.pass = v.pass && rho >= 0.9;
        v.detail += fmt("corr(mse, r | s=%g) %.4f; ", static_cast<double>(s), rho);
    }
    const Index r_fixed = h.config.grid.structures.at(0).r;
    auto [x, y] = curve(h, [r_fixed](const CurvePoint& c) { return c.r == r_fixed; },
                        [](const CurvePoint& c) { return static_cast<double>(c.s); });
    const double rho = pearson(x, y);
    v.pass = v.pass && rho >= 0.9;
    v.detail += fmt("corr(mse, s | r=%g) %.4f (each >= 0.9)", static_cast<double>(r_fixed), rho);
    return v;
}

/// Mean rmse per contamination level, in grid order.
std::vector<std::pair<double, double>> rmse_by_eps(const ExperimentResult& res) {
    std::map<double, std::pair<double, int>> acc;
    for (const MetricRow& row : res.rows) {
        acc[row.epsilon].first += *row.rmse_total;
        ++acc[row.epsilon].second;
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [eps, sum] : acc)
        out.emplace_back(eps, sum.first / sum.second);
    return out;
}

// Preset a exactly as shipped at desk scale (all structures, full eps grid);
// only sigma, the data-fit mode and the sigma guess change.
Verdict criterion8(const fs::path& out) {
    ExperimentConfig q1_low = desk_config('a'), q1_high = desk_config('a');
    q1_low.mode = q1_high.mode = Mode::SINGLE_Q1;
    q1_low.overrides.sigma = 0.5;
    q1_high.overrides.sigma = 5.0;
    const ExperimentResult low_run = run_and_write(out, "c8_q1_s0.5", q1_low);
    const ExperimentResult high_run = run_and_write(out, "c8_q1_s5", q1_high);
    const double low = mean_rmse(low_run), high = mean_rmse(high_run);
    const double ratio = high / low;

    ExperimentConfig q2_right = desk_config('a'), q2_wrong = desk_config('a');
    q2_right.mode = q2_wrong.mode = Mode::SINGLE_Q2;
    q2_wrong.tuning.sigma_guess = 10.0; // generating sigma is 1
    const double right = mean_rmse(run_and_write(out, "c8_q2_right", q2_right));
    const double wrong = mean_rmse(run_and_write(out, "c8_q2_wrong", q2_wrong));
    const double degradation = wrong / right;

    Verdict v;
    v.pass = ratio >= 5.0 && ratio <= 20.0 && degradation >= 1.5;
    v.detail = fmt("q1 rmse sigma=5 / sigma=0.5: %.4g / %.4g = %.3g (in [5, 20]); ", high, low, ratio) +
               fmt("q2 rmse tuned for 10 sigma / sigma: %.4g / %.4g = %.3g (>= 1.5); q1 ratio by eps:", wrong,
                   right, degradation);
    const auto lo = rmse_by_eps(low_run), hi = rmse_by_eps(high_run);
    for (std::size_t k = 0; k < lo.size(); ++k)
        v.detail += fmt(" %.2f:%.3g", lo[k].first, hi[k].second / lo[k].second);
    return v;
}

Verdict criterion9(const fs::path& first, const fs::path& second) {
    const std::string a = slurp(first / "results.csv"), b = slurp(second / "results.csv");
    Verdict v;
    v.pass = !a.empty() && a == b;
    v.detail = fmt("results.csv %g vs %g bytes, ", static_cast<double>(a.size()), static_cast<double>(b.size())) +
               (a == b ? "identical" : "different");
    return v;
}

struct Line {
    const char* name = "";
    Verdict verdict;
    bool done = false;
};

} // namespace

int main(int argc, char** argv) {
    fs::path out = fs::temp_directory_path() / "shuber_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) {
            out = argv[++i];
        } else {
            std::fprintf(stderr, "usage: acceptance [--out DIR]\n");
            return 2;
        }
    }
    fs::create_directories(out);
    const auto total = Clock::now();
    std::array<Line, 10> lines;
    auto report = [&lines](int id, const char* name, Verdict v) {
        lines[static_cast<std::size_t>(id)] = {name, std::move(v), true};
        std::printf("  [C%d evaluated]\n", id);
        std::fflush(stdout);
    };

    report(1, "prox oracle equivalence", criterion1());
    report(2, "Huber reduction", criterion2());

    const auto trend_start = Clock::now();
    const ExperimentResult trend = run_and_write(out, "c4_run1", huber_trend_config());
    const double trend_time = seconds_since(trend_start);
    report(4, "sorted Huber vs Huber trend", criterion4(trend, trend_time));
    report(5, "linear growth in eps", criterion5(trend));

    const ExperimentResult c = run_and_write(out, "desk_c", desk_config('c'));
    report(6, "robustness gap vs non-robust", criterion6(c));

    const ExperimentResult g = run_and_write(out, "desk_g", desk_config('g'));
    const ExperimentResult h = run_and_write(out, "desk_h", desk_config('h'));
    report(7, "structure scaling", criterion7(g, h));

    report(8, "sigma adaptivity of q=1", criterion8(out));

    // Remaining desk presets, so that criterion 3 sees every one of a..k.
    for (char id : {'a', 'd', 'e', 'f', 'i', 'j', 'k'})
        run_and_write(out, std::string("desk_") + id, desk_config(id));

    run_and_write(out, "c4_run2", huber_trend_config());
    report(9, "determinism", criterion9(out / "c4_run1", out / "c4_run2"));
    report(3, "solver soundness", criterion3(all_runs()));

    bool all = true;
    for (int id = 1; id <= 9; ++id) {
        const Line& l = lines[static_cast<std::size_t>(id)];
        std::printf("C%d %s  %s: %s\n", id, l.verdict.pass ? "PASS" : "FAIL", l.name, l.verdict.detail.c_str());
        all = all && l.done && l.verdict.pass;
    }
    std::printf("%s (%.1f s total)\n", all ? "ALL PASS" : "SOME CRITERIA FAILED", seconds_since(total));
    return all ? 0 : 1;
}
