#pragma once

// Experiment harness: runs preset grids, computes metrics, aggregates curves
// and writes CSV output.

#include "shuber/io.hpp"
#include "shuber/random.hpp"
#include "shuber/rates.hpp"
#include "shuber/solver.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <tuple>
#include <vector>

namespace shuber {

/// Tuning of a run: theory defaults from rates::default_tuning unless a value
/// is given explicitly.
struct TuningSpec {
    std::optional<double> lambda, chi, tau;
    rates::TuningConstants constants;
    /// Noise level plugged into q = 2 tunings; the generating sigma if unset.
    std::optional<double> sigma_guess;
    /// Slope weight constants for theta (A) and for the B-block (A bar).
    double a_theta = kDefaultWeightConstant;
    double a_reg = kDefaultWeightConstant;
};

struct ExperimentConfig {
    char preset_id = 'a';
    bool desk = false;
    PresetOverrides overrides;
    TuningSpec tuning;
    SolverOptions solver;
    /// Data-fit override for single-parameter presets (SINGLE_Q1 or SINGLE_Q2).
    std::optional<Mode> mode;
    std::uint64_t master_seed = 20240601;
    /// Worker threads; 0 means hardware concurrency.
    unsigned workers = 1;

    PresetConfig resolve() const { return desk ? desk_preset(preset_id, overrides) : preset(preset_id, overrides); }
};

struct MetricRow {
    char preset = 'a';
    Variant variant = Variant::SORTED_HUBER;
    Mode mode = Mode::SINGLE_Q2;
    SweepKind sweep = SweepKind::EPSILON;
    double epsilon = 0.0;
    Index r = 0;
    Index s = 0;
    Index rep = 0;
    std::uint64_t seed = 0;
    std::optional<double> mse_b, mse_gamma, rmse_total;
    double objective = 0.0;
    int sweeps = 0;
    double kkt = 0.0;
    /// Largest sweep-to-sweep increase of the objective trace (<= 0 when
    /// the trace is monotone).
    double max_increase = 0.0;
    bool converged = false;
    double lambda = 0.0, chi = 0.0, tau = 0.0;
    double wall_time_s = 0.0;
    std::string diagnostic;

    /// s or r, whichever the preset treats as its structure variable.
    Index sweep_value() const {
        if (sweep == SweepKind::RANK) return r;
        if (sweep == SweepKind::SPARSITY) return s;
        return is_sparse_preset(preset) ? s : r;
    }
};

struct CurvePoint {
    char preset = 'a';
    Variant variant = Variant::SORTED_HUBER;
    Index r = 0;
    Index s = 0;
    double epsilon = 0.0;
    Index count = 0;
    Index converged = 0;
    double mean_rmse = 0.0, se_rmse = 0.0;
    double mean_mse = 0.0, se_mse = 0.0;
};

struct ExperimentResult {
    PresetConfig config;
    std::vector<MetricRow> rows;
    std::vector<CurvePoint> curves;

    bool all_converged() const {
        return std::all_of(rows.begin(), rows.end(), [](const MetricRow& r) { return r.converged; });
    }
};

/// Estimator family used for a preset (before any mode override).
inline Mode preset_mode(char id) {
    return id >= 'g' ? Mode::DECOMP_Q2 : Mode::SINGLE_Q2;
}

/// Penalized problem for data generated from `truth`: the family follows the
/// truth kind (Slope-penalized vector, nuclear-penalized matrix, or low-rank
/// plus sparse), then the data-fit mode, variant and tuning (theory defaults
/// unless overridden) are applied.
inline Problem problem_for(const GroundTruthSpec& truth, Index d1, Index d2, Index n, Variant variant, Mode mode,
                           const TuningSpec& tuning) {
    const bool sparse = truth.kind == TruthKind::SPARSE_VECTOR;
    const bool decomp = truth.kind == TruthKind::LOW_RANK_PLUS_SPARSE;
    if (decomp != (mode == Mode::DECOMP_Q2))
        throw std::invalid_argument("problem_for: low-rank plus sparse truths are fitted in DECOMP_Q2 mode only");

    rates::TuningInput in;
    in.c = sparse ? rates::Case::SPARSE_SLOPE : (decomp ? rates::Case::DECOMP : rates::Case::TRACE);
    in.q = mode == Mode::SINGLE_Q1 ? 1 : 2;
    in.n = static_cast<double>(n);
    in.dims.s = static_cast<double>(std::max<Index>(truth.s, 1));
    in.dims.r = static_cast<double>(truth.r);
    in.dims.p = static_cast<double>(d1 * d2);
    in.dims.d1 = static_cast<double>(d1);
    in.dims.d2 = static_cast<double>(d2);
    in.sigma = tuning.sigma_guess.value_or(truth.sigma);
    in.a_star = decomp ? truth.spikeness_a : 0.0;
    const rates::TuningDefaults def = rates::default_tuning(in, tuning.constants);

    Problem pb;
    pb.mode = mode;
    pb.regularizer = sparse ? NormTag::SLOPE_P : NormTag::NUCLEAR;
    pb.lambda = tuning.lambda.value_or(def.lambda);
    pb.chi = decomp ? tuning.chi.value_or(def.chi) : 0.0;
    pb.tau = tuning.tau.value_or(def.tau);
    if (decomp)
        pb.box_a = truth.spikeness_a > 0.0 ? truth.spikeness_a / std::sqrt(static_cast<double>(n)) : kUnbounded;
    if (sparse)
        pb.reg_weights = WeightSequence::logarithmic(d1 * d2, tuning.a_reg);
    const WeightSequence w = WeightSequence::logarithmic(n, tuning.a_theta);
    switch (variant) {
    case Variant::SORTED_HUBER: pb.theta_weights = w; break;
    case Variant::HUBER: pb.theta_weights = WeightSequence::constant(n, w[0]); break;
    case Variant::NON_ROBUST: pb.tau = 0.0; break;
    }
    return pb;
}

inline Problem build_problem(const PresetConfig& cfg, const StructurePoint& pt, Variant variant, Mode mode,
                             const TuningSpec& tuning) {
    return problem_for(cfg.truth_at(pt), cfg.d1, cfg.d2, cfg.n, variant, mode, tuning);
}

/// Error metrics against the generating parameters.
inline void fill_metrics(MetricRow& row, const Dataset& data, const EstimateTriple& est) {
    if (!data.truth)
        return;
    const double mb = (est.b_hat - data.truth->b_star).squaredNorm();
    const double mg = (est.gamma_hat - data.truth->gamma_star).squaredNorm();
    row.mse_b = mb;
    row.mse_gamma = mg;
    row.rmse_total = std::sqrt(mb + mg);
}

/// max_k trace[k] - trace[k-1]; -inf for traces shorter than two sweeps.
inline double max_increase(const std::vector<double>& trace) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < trace.size(); ++k)
        worst = std::max(worst, trace[k] - trace[k - 1]);
    return worst;
}

namespace detail {

struct Cell {
    std::size_t structure;
    std::size_t eps;
    Index rep;
};

inline std::vector<Cell> enumerate_cells(const PresetConfig& cfg) {
    std::vector<Cell> cells;
    for (std::size_t a = 0; a < cfg.grid.structures.size(); ++a)
        for (std::size_t e = 0; e < cfg.grid.eps_grid.size(); ++e)
            for (Index rep = 0; rep < cfg.grid.reps; ++rep)
                cells.push_back({a, e, rep});
    return cells;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace detail

/// Mean and standard error of rmse_total and of the squared error per
/// (variant, structure, epsilon), in row order of first appearance.
inline std::vector<CurvePoint> aggregate_curves(const std::vector<MetricRow>& rows) {
    using Key = std::tuple<int, Index, Index, double>;
    std::map<Key, std::size_t> index;
    std::vector<CurvePoint> out;
    std::vector<std::vector<double>> rmse, mse;
    for (const MetricRow& row : rows) {
        const Key key{static_cast<int>(row.variant), row.r, row.s, row.epsilon};
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            CurvePoint c;
            c.preset = row.preset;
            c.variant = row.variant;
            c.r = row.r;
            c.s = row.s;
            c.epsilon = row.epsilon;
            out.push_back(c);
            rmse.emplace_back();
            mse.emplace_back();
        }
        CurvePoint& c = out[it->second];
        ++c.count;
        if (row.converged)
            ++c.converged;
        if (row.rmse_total) {
            rmse[it->second].push_back(*row.rmse_total);
            mse[it->second].push_back(*row.rmse_total * *row.rmse_total);
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].mean_rmse = detail::mean(rmse[k]);
        out[k].se_rmse = detail::standard_error(rmse[k]);
        out[k].mean_mse = detail::mean(mse[k]);
        out[k].se_mse = detail::standard_error(mse[k]);
    }
    return out;
}

/// Runs every (structure, epsilon, rep) cell and every variant. Each cell's
/// data depend only on the replicate seed, so results are identical for any
/// worker count; rows come back in (structure, epsilon, rep, variant) order.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result;
    result.config = config.resolve();
    const PresetConfig& cfg = result.config;
    const Mode mode = config.mode.value_or(preset_mode(cfg.id));
    config.solver.validate();

    const std::vector<detail::Cell> cells = detail::enumerate_cells(cfg);
    const std::size_t nv = cfg.grid.variants.size();
    result.rows.resize(cells.size() * nv);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= cells.size())
                return;
            try {
                const detail::Cell& cell = cells[k];
                const StructurePoint& pt = cfg.grid.structures[cell.structure];
                const double eps = cfg.grid.eps_grid[cell.eps];
                const std::uint64_t seed = replicate_seed(config.master_seed, static_cast<std::uint64_t>(cell.rep));
                const Dataset data = generate_dataset(cfg.truth_at(pt), cfg.n, cfg.d1, cfg.d2, eps, seed);
                for (std::size_t v = 0; v < nv; ++v) {
                    const Variant variant = cfg.grid.variants[v];
                    const Problem pb = build_problem(cfg, pt, variant, mode, config.tuning);
                    MetricRow& row = result.rows[k * nv + v];
                    row.preset = cfg.id;
                    row.variant = variant;
                    row.mode = mode;
                    row.sweep = cfg.grid.sweep;
                    row.epsilon = eps;
                    row.r = pt.r;
                    row.s = pt.s;
                    row.rep = cell.rep;
                    row.seed = seed;
                    row.lambda = pb.lambda;
                    row.chi = pb.chi;
                    row.tau = pb.tau;
                    // A failing fit is flagged on its row; the run goes on.
                    std::pair<EstimateTriple, SolverReport> out;
                    try {
                        out = fit(data, pb, config.solver);
                    } catch (const std::exception& e) {
                        row.converged = false;
                        row.objective = std::numeric_limits<double>::quiet_NaN();
                        row.kkt = std::numeric_limits<double>::quiet_NaN();
                        row.diagnostic = std::string("fit failed: ") + e.what();
                        continue;
                    }
                    auto& [est, report] = out;
                    fill_metrics(row, data, est);
                    row.objective = report.objective_trace.empty() ? objective(data, pb, est)
                                                                   : report.objective_trace.back();
                    row.sweeps = report.sweeps_used;
                    row.kkt = report.kkt_residual;
                    row.max_increase = max_increase(report.objective_trace);
                    row.converged = report.converged;
                    row.wall_time_s = report.wall_time_s;
                    row.diagnostic = report.diagnostic;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next.store(cells.size());
                return;
            }
        }
    };
    unsigned workers = config.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.workers;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, cells.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
    }
    if (error)
        std::rethrow_exception(error);
    result.curves = aggregate_curves(result.rows);
    return result;
}

// ---------------------------------------------------------------------------
// CSV output. results.csv carries no timing so that it is reproducible byte
// for byte; wall times go to timings.csv.

inline constexpr int kCsvSchema = 1;

inline std::string results_header() {
    return "schema,preset,variant,mode,sweep,epsilon,r,s,sweep_value,rep,seed,mse_B,mse_Gamma,rmse_total,"
           "objective,sweeps,kkt,max_increase,converged,lambda,chi,tau";
}

inline std::string format_row(const MetricRow& row) {
    auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
    std::ostringstream os;
    os << kCsvSchema << ',' << row.preset << ',' << to_string(row.variant) << ',' << to_string(row.mode) << ','
       << to_string(row.sweep) << ',' << io::format_double(row.epsilon) << ',' << row.r << ',' << row.s << ','
       << row.sweep_value() << ',' << row.rep << ',' << row.seed << ',' << opt(row.mse_b) << ','
       << opt(row.mse_gamma) << ',' << opt(row.rmse_total) << ',' << io::format_double(row.objective) << ','
       << row.sweeps << ',' << io::format_double(row.kkt) << ',' << io::format_double(row.max_increase) << ','
       << (row.converged ? 1 : 0) << ','
       << io::format_double(row.lambda) << ',' << io::format_double(row.chi) << ',' << io::format_double(row.tau);
    return os.str();
}

inline void write_results(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << results_header() << '\n';
    for (const MetricRow& row : rows)
        os << format_row(row) << '\n';
}

inline void write_timings(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << "preset,variant,epsilon,r,s,rep,wall_time_s,diagnostic\n";
    for (const MetricRow& row : rows)
        os << row.preset << ',' << to_string(row.variant) << ',' << io::format_double(row.epsilon) << ',' << row.r
           << ',' << row.s << ',' << row.rep << ',' << io::format_double(row.wall_time_s) << ",\""
           << (row.converged ? std::string() : row.diagnostic) << "\"\n";
}

inline void write_curves(std::ostream& os, const std::vector<CurvePoint>& curves) {
    os << "schema,preset,variant,r,s,epsilon,count,converged,mean_rmse,se_rmse,mean_mse,se_mse\n";
    for (const CurvePoint& c : curves)
        os << kCsvSchema << ',' << c.preset << ',' << to_string(c.variant) << ',' << c.r << ',' << c.s << ','
           << io::format_double(c.epsilon) << ',' << c.count << ',' << c.converged << ','
           << io::format_double(c.mean_rmse) << ',' << io::format_double(c.se_rmse) << ','
           << io::format_double(c.mean_mse) << ',' << io::format_double(c.se_mse) << '\n';
}

/// results.csv, curves.csv, timings.csv and config.json under `dir`.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& config,
                             const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "results.csv", std::ios::trunc);
        write_results(os, result.rows);
    }
    {
        std::ofstream os(dir / "curves.csv", std::ios::trunc);
        write_curves(os, result.curves);
    }
    {
        std::ofstream os(dir / "timings.csv", std::ios::trunc);
        write_timings(os, result.rows);
    }
    const PresetConfig& cfg = result.config;
    io::json j;
    j["preset"] = std::string(1, cfg.id);
    j["desk"] = config.desk;
    j["n"] = cfg.n;
    j["d1"] = cfg.d1;
    j["d2"] = cfg.d2;
    j["reps"] = cfg.grid.reps;
    j["eps_grid"] = cfg.grid.eps_grid;
    j["master_seed"] = config.master_seed;
    j["truth"] = io::spec_to_json(cfg.truth);
    io::json structures = io::json::array();
    for (const StructurePoint& pt : cfg.grid.structures)
        structures.push_back({{"r", pt.r}, {"s", pt.s}});
    j["structures"] = structures;
    io::json variants = io::json::array();
    for (Variant v : cfg.grid.variants)
        variants.push_back(to_string(v));
    j["variants"] = variants;
    j["mode"] = to_string(config.mode.value_or(preset_mode(cfg.id)));
    const TuningSpec& t = config.tuning;
    j["tuning"] = {{"source", (t.lambda || t.chi || t.tau) ? "explicit/default_tuning" : "default_tuning"},
                   {"c_lambda", t.constants.c_lambda},
                   {"c_chi", t.constants.c_chi},
                   {"c_tau", t.constants.c_tau},
                   {"L", t.constants.lip},
                   {"C1", t.constants.c1},
                   {"rho", t.constants.rho},
                   {"A", t.a_theta},
                   {"A_bar", t.a_reg}};
    if (t.sigma_guess)
        j["tuning"]["sigma_guess"] = *t.sigma_guess;
    j["solver"] = {{"max_sweeps", config.solver.max_sweeps},
                   {"tol_rel_obj", config.solver.tol_rel_obj},
                   {"tol_kkt", config.solver.tol_kkt},
                   {"step_rule", config.solver.step_rule == StepRule::FIXED_LIPSCHITZ ? "FIXED_LIPSCHITZ"
                                                                                       : "BACKTRACKING"},
                   {"box_prox", config.solver.box_prox == BoxProx::EXACT ? "EXACT" : "SVT_THEN_CLIP"}};
    std::ofstream(dir / "config.json") << j.dump(2) << '\n';
}

} // namespace shuber
