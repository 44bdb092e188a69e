// Command-line harness: generate, fit, experiment, rates, oracle.

#include "shuber/config.hpp"
#include "shuber/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace shuber;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset;
    std::string eps_grid;
    std::optional<Index> reps;
    std::optional<std::uint64_t> seed;
    bool desk = false;
    std::string out;
    std::optional<Index> n, p, d1, d2, s, r;
    std::optional<double> sigma, outlier_value, entry_value;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "JSON configuration file");
        app->add_option("--preset", preset, "experiment preset a..k");
        app->add_option("--eps-grid", eps_grid, "comma-separated contamination levels");
        app->add_option("--reps", reps, "replicates per grid cell");
        app->add_option("--seed", seed, "master seed");
        app->add_flag("--desk", desk, "desk-scale sizes (n=400; p=100 or d1=d2=10)");
        app->add_option("--out", out, "output directory");
        app->add_option("--n", n, "sample size");
        app->add_option("--p", p, "dimension (sparse presets)");
        app->add_option("--d1", d1, "rows of the parameter matrix");
        app->add_option("--d2", d2, "columns of the parameter matrix");
        app->add_option("--s", s, "sparsity (replaces every structure point)");
        app->add_option("--r", r, "rank (replaces every structure point)");
        app->add_option("--sigma", sigma, "noise level");
        app->add_option("--outlier-value", outlier_value, "outlier shift M");
        app->add_option("--entry-value", entry_value, "signal level");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (!preset.empty()) cfg.preset_id = preset_id_from_string(preset);
        if (desk) cfg.desk = true;
        if (seed) cfg.master_seed = *seed;
        PresetOverrides& o = cfg.overrides;
        if (!eps_grid.empty()) o.eps_grid = detail::parse_grid(eps_grid);
        if (reps) o.reps = *reps;
        if (n) o.n = *n;
        if (p) o.p = *p;
        if (d1) o.d1 = *d1;
        if (d2) o.d2 = *d2;
        if (s) o.s = *s;
        if (r) o.r = *r;
        if (sigma) o.sigma = *sigma;
        if (outlier_value) o.outlier_value = *outlier_value;
        if (entry_value) o.entry_value = *entry_value;
        return cfg;
    }
};

int cmd_generate(const CommonFlags& flags, double eps, Index rep, bool csv) {
    if (flags.out.empty())
        throw std::invalid_argument("generate: --out is required");
    const ExperimentConfig cfg = flags.resolve();
    const PresetConfig pc = cfg.resolve();
    const StructurePoint pt = pc.grid.structures.front();
    const GroundTruthSpec spec = pc.truth_at(pt);
    const std::uint64_t seed = replicate_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));
    const Dataset ds = generate_dataset(spec, pc.n, pc.d1, pc.d2, eps, seed);
    io::DatasetMeta meta;
    meta.spec = spec;
    meta.epsilon = eps;
    meta.seed = seed;
    meta.extra = {{"preset", std::string(1, pc.id)}, {"rep", rep}, {"master_seed", cfg.master_seed}};
    io::write_dataset(flags.out, ds, meta, csv);
    std::printf("dataset %s: preset=%c n=%lld d1=%lld d2=%lld r=%lld s=%lld o=%lld sigma=%s seed=%llu\n",
                flags.out.c_str(), pc.id, static_cast<long long>(pc.n), static_cast<long long>(pc.d1),
                static_cast<long long>(pc.d2), static_cast<long long>(spec.r), static_cast<long long>(spec.s),
                static_cast<long long>(outlier_count(eps, pc.n)), io::format_double(spec.sigma).c_str(),
                static_cast<unsigned long long>(seed));
    return 0;
}

struct FitFlags {
    std::string data_dir;
    std::string out;
    std::string results;
    std::string mode;
    std::string variant = "SORTED_HUBER";
    std::optional<double> lambda, chi, tau, sigma_guess;
    int max_sweeps = 20000;
};

int cmd_fit(const FitFlags& f) {
    const io::LoadedDataset loaded = io::read_dataset(f.data_dir);
    const Dataset& data = loaded.data;
    const GroundTruthSpec& spec = loaded.meta.spec;
    const Mode mode = !f.mode.empty() ? mode_from_string(f.mode)
                                      : (spec.kind == TruthKind::LOW_RANK_PLUS_SPARSE ? Mode::DECOMP_Q2
                                                                                      : Mode::SINGLE_Q2);
    TuningSpec tuning;
    tuning.lambda = f.lambda;
    tuning.chi = f.chi;
    tuning.tau = f.tau;
    tuning.sigma_guess = f.sigma_guess;
    const Variant variant = variant_from_string(f.variant);
    const Problem pb = problem_for(spec, data.d1, data.d2, data.n(), variant, mode, tuning);
    SolverOptions opts;
    opts.max_sweeps = f.max_sweeps;
    auto [est, report] = fit(data, pb, opts);

    const fs::path out = f.out.empty() ? fs::path(f.data_dir) : fs::path(f.out);
    io::write_estimate(out, est);

    MetricRow row;
    const auto& extra = loaded.meta.extra;
    row.preset = extra.contains("preset") ? extra["preset"].get<std::string>()[0] : '-';
    row.variant = variant;
    row.mode = mode;
    row.epsilon = loaded.meta.epsilon;
    row.r = spec.r;
    row.s = spec.s;
    row.rep = extra.value("rep", Index{0});
    row.seed = loaded.meta.seed;
    fill_metrics(row, data, est);
    row.objective = objective(data, pb, est);
    row.sweeps = report.sweeps_used;
    row.kkt = report.kkt_residual;
    row.max_increase = max_increase(report.objective_trace);
    row.converged = report.converged;
    row.lambda = pb.lambda;
    row.chi = pb.chi;
    row.tau = pb.tau;
    row.wall_time_s = report.wall_time_s;

    const fs::path results = f.results.empty() ? out / "results.csv" : fs::path(f.results);
    const bool fresh = !fs::exists(results) || fs::file_size(results) == 0;
    std::ofstream os(results, std::ios::app);
    if (fresh)
        os << results_header() << '\n';
    os << format_row(row) << '\n';
    std::cout << results_header() << '\n' << format_row(row) << '\n';
    if (!report.converged)
        std::cerr << "fit did not converge: " << report.diagnostic << '\n';
    return report.converged ? 0 : 2;
}

int cmd_experiment(const CommonFlags& flags, const std::string& mode, const std::string& variants,
                   std::optional<unsigned> workers, std::optional<double> sigma_guess) {
    ExperimentConfig cfg = flags.resolve();
    if (!mode.empty()) cfg.mode = mode_from_string(mode);
    if (workers) cfg.workers = *workers;
    if (sigma_guess) cfg.tuning.sigma_guess = *sigma_guess;
    if (!variants.empty()) {
        std::vector<Variant> v;
        std::stringstream ss(variants);
        std::string item;
        while (std::getline(ss, item, ','))
            v.push_back(variant_from_string(item));
        cfg.overrides.variants = v;
    }
    const fs::path out = flags.out.empty() ? fs::path("results") / std::string(1, cfg.preset_id) : fs::path(flags.out);
    const ExperimentResult res = run_experiment(cfg);
    write_experiment(out, cfg, res);
    std::size_t failed = 0;
    for (const MetricRow& row : res.rows)
        failed += row.converged ? 0 : 1;
    std::printf("preset %c: %zu runs, %zu not converged; output in %s\n", res.config.id, res.rows.size(), failed,
                out.string().c_str());
    std::printf("%-13s %5s %5s %8s %6s %14s %12s\n", "variant", "r", "s", "epsilon", "count", "mean_rmse", "se");
    for (const CurvePoint& c : res.curves)
        std::printf("%-13s %5lld %5lld %8.3f %6lld %14.6g %12.4g\n", to_string(c.variant).c_str(),
                    static_cast<long long>(c.r), static_cast<long long>(c.s), c.epsilon,
                    static_cast<long long>(c.count), c.mean_rmse, c.se_rmse);
    return failed == 0 ? 0 : 2;
}

struct RatesFlags {
    std::string rate_case = "SPARSE_SLOPE";
    double n = 1000, s = 0, r = 0, p = 0, d1 = 0, d2 = 0;
    double delta = 0.05, sigma = 1.0, a_star = 0.0, lip = 1.0, rho = 1.0, mu = 1.0, c1 = 1.0;
    int q = 2;
    std::string eps_grid = "0,0.05,0.1,0.15,0.2,0.25,0.3";
};

int cmd_rates(const RatesFlags& f) {
    const rates::Case c = rates::case_from_string(f.rate_case);
    rates::Dims dims{f.s, f.r, f.p, f.d1, f.d2};
    if (dims.p == 0)
        dims.p = c == rates::Case::SPARSE_L1 || c == rates::Case::SPARSE_SLOPE ? 0 : f.d1 * f.d2;
    std::printf("case %s, n = %s\n", rates::to_string(c).c_str(), io::format_double(f.n).c_str());
    double rate = 0.0;
    if (c == rates::Case::DECOMP) {
        rates::DecompRateInput in{f.n, f.r, f.s, f.delta, f.a_star, f.c1, f.lip, f.sigma, f.d1, f.d2, dims.p};
        rate = rates::rate_decomp(in);
        std::printf("rate_decomp %.6g\n", rate);
    } else {
        const double d_eff = rates::effective_dim(c, dims);
        rate = rates::rate_single(f.n, d_eff, f.delta, f.rho, f.mu, f.lip);
        std::printf("d_eff %.6g\nrate_single %.6g\n", d_eff, rate);
    }
    std::printf("%8s %14s %14s\n", "epsilon", "omega(eps)", "rate+omega");
    for (double e : detail::parse_grid(f.eps_grid))
        std::printf("%8.3f %14.10f %14.6g\n", e, rates::omega_eps(e), rate + rates::omega_eps(e));
    rates::TuningInput ti;
    ti.c = c;
    ti.q = f.q;
    ti.n = f.n;
    ti.dims = dims;
    ti.sigma = f.sigma;
    ti.a_star = f.a_star;
    rates::TuningConstants k;
    k.lip = f.lip;
    k.rho = f.rho;
    k.c1 = f.c1;
    const rates::TuningDefaults t = rates::default_tuning(ti, k);
    std::printf("default tuning (q=%d): lambda %.6g chi %.6g tau %.6g\n", f.q, t.lambda, t.chi, t.tau);
    return 0;
}

int cmd_oracle(int instances, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_real_distribution<double> unif(0.05, 3.0);
    auto draw = [&](Index m) {
        Vector v(m), w(m);
        for (Index i = 0; i < m; ++i) {
            v[i] = normal(gen);
            w[i] = unif(gen);
        }
        std::sort(w.data(), w.data() + m, std::greater<>());
        return std::make_pair(v, w);
    };
    bool ok = true;
    for (Index m = 2; m <= 6; ++m) {
        double worst = 0.0;
        for (int k = 0; k < instances; ++k) {
            auto [v, w] = draw(m);
            const Vector x = prox_sorted_l1(v, w);
            const auto ref = oracle::brute_prox_slope(v, w, oracle::Method::EXHAUSTIVE_PATTERN);
            worst = std::max(worst, (x - ref.argmin).lpNorm<Eigen::Infinity>());
        }
        const bool pass = worst <= 1e-8;
        ok = ok && pass;
        std::printf("prox_sorted_l1 vs EXHAUSTIVE_PATTERN dim %lld: max |diff| %.3e  %s\n",
                    static_cast<long long>(m), worst, pass ? "ok" : "MISMATCH");
    }
    for (Index m : {10, 50}) {
        const int count = std::max(1, instances / 5);
        bool pass = true;
        for (int k = 0; k < count; ++k) {
            auto [v, w] = draw(m);
            const Vector x = prox_sorted_l1(v, w);
            const auto ref = oracle::brute_prox_slope(v, w, oracle::Method::PROJECTED_SUBGRADIENT);
            // Strong convexity puts the true minimizer within sqrt(2 gap) of the oracle's point.
            const double radius = std::sqrt(2.0 * ref.certified_gap) + 1e-9;
            pass = pass && oracle::detail::prox_objective(x, v, w) <= ref.value + 1e-12 * (1.0 + ref.value) &&
                   (x - ref.argmin).norm() <= radius;
        }
        ok = ok && pass;
        std::printf("prox_sorted_l1 vs PROJECTED_SUBGRADIENT dim %lld (%d instances): %s\n",
                    static_cast<long long>(m), count, pass ? "ok" : "MISMATCH");
    }
    {
        double worst = 0.0;
        for (int k = 0; k < std::max(1, instances / 10); ++k) {
            auto [u, w] = draw(2);
            const double tau = unif(gen);
            const auto impl = sorted_huber_q1(u, WeightSequence::from_values(w), tau);
            const auto ref = oracle::brute_infconv_q1(u, w, tau, oracle::Method::GRID);
            worst = std::max(worst, std::abs(impl.value - ref.value) - ref.certified_gap);
        }
        const bool pass = worst <= 1e-9;
        ok = ok && pass;
        std::printf("sorted_huber_q1 vs GRID dim 2: worst excess over certified gap %.3e  %s\n", worst,
                    pass ? "ok" : "MISMATCH");
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sorted-Huber robust regression: data generation, fitting and experiments"};
    app.require_subcommand(1);

    CommonFlags gen_flags;
    double gen_eps = 0.0;
    Index gen_rep = 0;
    bool gen_csv = false;
    auto* gen = app.add_subcommand("generate", "write a synthetic data set");
    gen_flags.add(gen);
    gen->add_option("--eps", gen_eps, "contamination level");
    gen->add_option("--rep", gen_rep, "replicate index");
    gen->add_flag("--csv", gen_csv, "also write CSV exports");

    FitFlags fit_flags;
    auto* fitc = app.add_subcommand("fit", "fit an estimator to a data set directory");
    fitc->add_option("--data", fit_flags.data_dir, "data set directory")->required();
    fitc->add_option("--out", fit_flags.out, "directory for estimate files (default: data directory)");
    fitc->add_option("--results", fit_flags.results, "results.csv to append to");
    fitc->add_option("--mode", fit_flags.mode, "DECOMP_Q2, SINGLE_Q2 or SINGLE_Q1");
    fitc->add_option("--variant", fit_flags.variant, "SORTED_HUBER, HUBER or NON_ROBUST");
    fitc->add_option("--lambda", fit_flags.lambda);
    fitc->add_option("--chi", fit_flags.chi);
    fitc->add_option("--tau", fit_flags.tau);
    fitc->add_option("--sigma-guess", fit_flags.sigma_guess, "noise level used by default tunings");
    fitc->add_option("--max-sweeps", fit_flags.max_sweeps);

    CommonFlags exp_flags;
    std::string exp_mode, exp_variants;
    std::optional<unsigned> exp_workers;
    std::optional<double> exp_sigma_guess;
    auto* exp = app.add_subcommand("experiment", "run a preset grid and write results.csv / curves.csv");
    exp_flags.add(exp);
    exp->add_option("--mode", exp_mode, "data-fit override: SINGLE_Q1 or SINGLE_Q2");
    exp->add_option("--variants", exp_variants, "comma-separated variant list");
    exp->add_option("--workers", exp_workers, "worker threads (0 = all cores)");
    exp->add_option("--sigma-guess", exp_sigma_guess, "noise level used by default tunings");

    RatesFlags rf;
    auto* rat = app.add_subcommand("rates", "print effective dimension, rates, omega(eps) and default tunings");
    rat->add_option("--case", rf.rate_case, "SPARSE_L1, SPARSE_SLOPE, TRACE or DECOMP");
    rat->add_option("--n", rf.n);
    rat->add_option("--s", rf.s);
    rat->add_option("--r", rf.r);
    rat->add_option("--p", rf.p);
    rat->add_option("--d1", rf.d1);
    rat->add_option("--d2", rf.d2);
    rat->add_option("--delta", rf.delta);
    rat->add_option("--sigma", rf.sigma);
    rat->add_option("--a-star", rf.a_star);
    rat->add_option("--L", rf.lip);
    rat->add_option("--rho", rf.rho);
    rat->add_option("--mu", rf.mu);
    rat->add_option("--C1", rf.c1);
    rat->add_option("--q", rf.q);
    rat->add_option("--eps-grid", rf.eps_grid);

    int oracle_instances = 1000;
    std::uint64_t oracle_seed = 7;
    auto* orc = app.add_subcommand("oracle", "check the prox and loss kernels against brute-force references");
    orc->add_option("--instances", oracle_instances, "random instances per dimension");
    orc->add_option("--seed", oracle_seed);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return cmd_generate(gen_flags, gen_eps, gen_rep, gen_csv);
        if (*fitc) return cmd_fit(fit_flags);
        if (*exp) return cmd_experiment(exp_flags, exp_mode, exp_variants, exp_workers, exp_sigma_guess);
        if (*rat) return cmd_rates(rf);
        if (*orc) return cmd_oracle(oracle_instances, oracle_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
