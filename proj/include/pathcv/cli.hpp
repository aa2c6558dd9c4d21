#pragma once

#include <pathcv/cv.hpp>
#include <pathcv/diagnostics.hpp>
#include <pathcv/error.hpp>
#include <pathcv/io.hpp>
#include <pathcv/sim.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace pathcv {

enum class Command { fit, cv, simulate, diagnose };
enum class OutputFormat { json, csv };
enum class Diagnostic { universal, order_stat, cr, shrinkage, theoretical_lambda };

inline Diagnostic parse_diagnostic(const std::string& s)
{
    if (s == "universal") return Diagnostic::universal;
    if (s == "order-stat" || s == "order_stat") return Diagnostic::order_stat;
    if (s == "cr") return Diagnostic::cr;
    if (s == "shrinkage") return Diagnostic::shrinkage;
    if (s == "theoretical-lambda" || s == "theoretical_lambda") return Diagnostic::theoretical_lambda;
    detail::fail(ErrorCode::invalid_argument, "unknown diagnostic '" + s + "'");
}

/// Everything one invocation needs; filled from the command line.
struct RunConfig
{
    Command command = Command::fit;
    std::string data_path;
    std::string response_column = "y";
    FamilyKind family = FamilyKind::gaussian;
    PenaltyKind penalty = PenaltyKind::lasso;
    std::optional<double> gamma;
    int n_lambda = 100;
    std::optional<double> min_ratio;
    Method method = Method::ccv;
    int k = 10;
    std::optional<int> n_c;
    int r = 50;
    std::uint64_t seed = 1;
    std::optional<Rule> rule;
    std::optional<int> size_cap;
    std::string output_path;
    OutputFormat output_format = OutputFormat::json;
    bool intercept = false;
    int threads = 1;

    // simulate
    std::string config_path;
    std::string output_dir;
    std::string export_data; ///< write replication 0's train / test CSVs with this path prefix and stop
    bool full_scale = false;
    bool timing = false;

    // diagnose
    Diagnostic diagnostic = Diagnostic::universal;
    int n = 500;
    int p = 1000;
    double sigma = 1.0;
    double rho = 0.0;
    int order_k = 3;
    int order_l = 2;
    int trials = 2000;

    PenaltySpec penalty_spec() const
    {
        const double g = gamma.value_or(3.0);
        switch (penalty) {
            case PenaltyKind::lasso: return PenaltySpec::lasso();
            case PenaltyKind::scad: return PenaltySpec::scad(g);
            case PenaltyKind::mcp: return PenaltySpec::mcp(g);
        }
        return PenaltySpec::lasso();
    }

    /// Range checks run before any data is read.
    void validate() const
    {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) detail::fail(ErrorCode::config_error, msg);
        };
        need(n_lambda >= 2, "--n-lambda must be at least 2");
        need(!min_ratio || (*min_ratio > 0.0 && *min_ratio < 1.0), "--min-ratio must lie in (0, 1)");
        need(k >= 2, "--k must be at least 2");
        need(r >= 1, "--r must be at least 1");
        need(!n_c || *n_c >= 2, "--nc must be at least 2");
        need(threads >= 1, "--threads must be at least 1");
        need(sigma >= 0.0, "--sigma must be non-negative");
        need(rho >= 0.0 && rho < 1.0, "--rho must lie in [0, 1)");
        need(trials >= 1, "--trials must be at least 1");
        if (gamma) {
            try {
                penalty_spec().validate();
            } catch (const Error& e) {
                detail::fail(ErrorCode::config_error, e.what());
            }
        }
        if (command == Command::fit || command == Command::cv) need(!data_path.empty(), "--data is required");
        if (command == Command::simulate) need(!config_path.empty(), "--config is required");
        if (rule && command == Command::cv) {
            need(method == Method::kfold || method == Method::kfold_1se, "--rule applies to kfold only");
        }
    }
};

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out)
{
    if (cfg.output_path.empty())
        out << text;
    else
        write_text(cfg.output_path, text);
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline PathOptions path_options(const RunConfig& cfg)
{
    PathOptions po;
    po.intercept = cfg.intercept;
    return po;
}

inline LambdaGrid grid_for(const Dataset& d, const RunConfig& cfg, const PathOptions& po)
{
    return lambda_grid(d, cfg.n_lambda, cfg.min_ratio.value_or(default_min_ratio(d.n(), d.p())), po);
}

/// Data for the diagnostics: --data when given, else a linear-model draw with beta head (2.0, 1.6, 1.2, 0.8, 0.4).
inline SimData diagnostic_data(const RunConfig& cfg)
{
    SimData s;
    if (!cfg.data_path.empty()) {
        s.train = load_csv(cfg.data_path, cfg.response_column, cfg.family);
        return s;
    }
    SimConfig sc;
    sc.n = cfg.n;
    sc.p = cfg.p;
    detail::require(cfg.p >= 5, "diagnostics on generated data need p >= 5");
    return gen_linear(cfg.n, cfg.p, cfg.rho, sc.beta_vector(), cfg.sigma, cfg.seed, 1);
}

inline int run_fit(const RunConfig& cfg, std::ostream& out)
{
    const Dataset d = load_csv(cfg.data_path, cfg.response_column, cfg.family);
    const auto po = path_options(cfg);
    const auto path = fit_path(d, cfg.penalty_spec(), grid_for(d, cfg, po), po);
    emit(cfg, cfg.output_format == OutputFormat::json ? dump(path_json(path)) : path_csv(path), out);
    return 0;
}

inline int run_cv(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    Dataset d = load_csv(cfg.data_path, cfg.response_column, cfg.family);
    d.validate();
    const auto po = path_options(cfg);
    const auto full = fit_path(d, cfg.penalty_spec(), grid_for(d, cfg, po), po);
    CvOptions opt;
    opt.path = po;
    opt.threads = cfg.threads;
    Method method = cfg.method;
    if (cfg.rule && (method == Method::kfold || method == Method::kfold_1se))
        method = *cfg.rule == Rule::min ? Method::kfold : Method::kfold_1se;

    SelectionReport rep;
    std::vector<std::string> warnings;
    Json plan_info;
    if (method == Method::kfold || method == Method::kfold_1se) {
        const auto folds = kfold_splits(d.n(), cfg.k, cfg.seed);
        rep = kfold_cv(d, full, folds, method == Method::kfold ? Rule::min : Rule::one_se, opt);
        plan_info = Json{{"k", cfg.k}, {"n_c", folds.n_c}, {"seed", cfg.seed}};
    } else {
        const int nc = cfg.n_c.value_or(default_nc(method, cfg.family, d.n()));
        if (nc >= d.n()) fail(ErrorCode::config_error, "--nc must be smaller than n = " + std::to_string(d.n()));
        std::span<const double> ys;
        if (cfg.family == FamilyKind::binomial) ys = {d.y.data(), static_cast<std::size_t>(d.n())};
        const auto plan = monte_carlo_splits(d.n(), nc, cfg.r, cfg.seed, ys);
        if (method == Method::cv_nv) {
            const double ratio = static_cast<double>(d.n()) / nc;
            if (cfg.r < ratio * ratio) {
                warnings.push_back("r = " + std::to_string(cfg.r) + " is below (n/n_c)^2 = " + format_double(ratio * ratio) +
                                   "; the split average may be noisy");
            }
            rep = cv_nv(d, full, plan, opt);
        } else {
            const int cap = cfg.size_cap.value_or(ccv_size_cap(d.n(), d.p(), nc, cfg.intercept));
            rep = ccv(d, full, plan, cap, opt);
        }
        plan_info = Json{{"n_c", nc}, {"n_v", d.n() - nc}, {"r", cfg.r}, {"seed", cfg.seed}};
    }
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    if (cfg.output_format == OutputFormat::csv) {
        emit(cfg, curve_csv(rep.curve), out);
        return 0;
    }
    Json j = report_json(rep, d.column_names);
    j["plan"] = plan_info;
    j["warnings"] = warnings;
    emit(cfg, dump(j), out);
    return 0;
}

inline int run_simulate(const RunConfig& cfg, std::ostream& out)
{
    SimConfig sc = load_sim_config(cfg.config_path);
    if (cfg.full_scale) sc.apply_full_scale();
    sc.threads = cfg.threads;
    if (!cfg.export_data.empty()) {
        const SimData data = generate(sc, derive_seed(sc.base_seed, fnv1a("data")));
        write_csv(cfg.export_data + "_train.csv", data.train);
        write_csv(cfg.export_data + "_test.csv", data.test);
        return 0;
    }
    const auto res = run_experiment(sc);
    const std::string agg = aggregate_csv(res.aggregate);
    const std::string log = log_csv(res.log, sc.family, cfg.timing);
    const std::string table = format_table(res);
    if (!cfg.output_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        if (ec) fail(ErrorCode::io_error, "cannot create '" + cfg.output_dir + "': " + ec.message());
        const std::filesystem::path dir(cfg.output_dir);
        write_text((dir / "aggregate.csv").string(), agg);
        write_text((dir / "reps.csv").string(), log);
        write_text((dir / "table.txt").string(), table);
        if (sc.sweep) {
            write_text((dir / "sweep.csv").string(), sweep_csv(res.sweep));
            write_text((dir / "sweep_reps.csv").string(), log_csv(res.sweep_log, sc.family, cfg.timing));
        }
        out << table;
        return 0;
    }
    emit(cfg, cfg.output_format == OutputFormat::csv ? agg : table + "\n" + agg, out);
    return 0;
}

inline int run_diagnose(const RunConfig& cfg, std::ostream& out)
{
    const bool csv = cfg.output_format == OutputFormat::csv;
    switch (cfg.diagnostic) {
        case Diagnostic::universal: {
            const double v = universal_threshold(cfg.n, cfg.p, cfg.sigma);
            if (csv) {
                emit(cfg, "n,p,sigma,value\n" + std::to_string(cfg.n) + "," + std::to_string(cfg.p) + "," +
                              format_double(cfg.sigma) + "," + format_double(v) + "\n",
                     out);
            } else {
                emit(cfg, dump(Json{{"schema_version", schema_version}, {"diagnostic", "universal"}, {"n", cfg.n},
                                    {"p", cfg.p}, {"sigma", cfg.sigma}, {"value", v}}),
                     out);
            }
            return 0;
        }
        case Diagnostic::order_stat: {
            OrderStatOptions lo;
            lo.threads = cfg.threads;
            if (cfg.rho != 0.0) {
                lo.model = NoiseModel::ar1;
                lo.rho = cfg.rho;
            }
            const double prob = order_stat_probability(cfg.p, cfg.order_k, cfg.order_l, cfg.trials, cfg.seed, lo);
            if (csv) {
                emit(cfg, "p,k,l,trials,probability\n" + std::to_string(cfg.p) + "," + std::to_string(cfg.order_k) +
                              "," + std::to_string(cfg.order_l) + "," + std::to_string(cfg.trials) + "," +
                              format_double(prob) + "\n",
                     out);
            } else {
                emit(cfg, dump(Json{{"schema_version", schema_version}, {"diagnostic", "order-stat"}, {"p", cfg.p},
                                    {"k", cfg.order_k}, {"l", cfg.order_l}, {"trials", cfg.trials},
                                    {"seed", cfg.seed}, {"rho", cfg.rho}, {"probability", prob}}),
                     out);
            }
            return 0;
        }
        case Diagnostic::cr: {
            const SimData s = diagnostic_data(cfg);
            auto po = path_options(cfg);
            po.saturation = 0.0; // every split path must cover the whole grid
            const auto pen = cfg.penalty_spec();
            const auto grid = grid_for(s.train, cfg, po);
            const auto full = fit_path(s.train, pen, grid, po);
            const auto folds = kfold_splits(s.train.n(), cfg.k, cfg.seed);
            CvOptions opt;
            opt.path = po;
            opt.threads = cfg.threads;
            const auto sp = fit_split_paths(s.train, pen, grid, folds, opt);
            auto series = coherent_rate(full.active_sets(), sp.active_sets);
            const auto kf = kfold_cv(s.train, full, folds, Rule::min, opt);
            series.cv_choice_position = kf.selected_path_position;
            if (cfg.data_path.empty()) series.first_noise_position = first_noise_position(full.active_sets(), ActiveSet({0, 1, 2, 3, 4}));
            std::ostringstream os;
            os << "position,lambda,size,cr\n";
            for (int k = 0; k < full.size(); ++k) {
                os << k << ',' << format_double(grid[k]) << ',' << full.active_set(k).size() << ','
                   << format_double(series.cr[static_cast<std::size_t>(k)]) << '\n';
            }
            if (csv) {
                emit(cfg, os.str(), out);
            } else {
                Json j{{"schema_version", schema_version}, {"diagnostic", "cr"}, {"k", cfg.k}, {"seed", cfg.seed}};
                j["cr"] = series.cr;
                j["cv_choice_position"] = *series.cv_choice_position;
                j["first_noise_position"] =
                    series.first_noise_position ? Json(*series.first_noise_position) : Json(nullptr);
                if (series.first_noise_position) {
                    const auto m = mean_cr_from(series, *series.first_noise_position);
                    j["mean_cr_after_first_noise"] = m ? Json(*m) : Json(nullptr);
                }
                emit(cfg, dump(j), out);
            }
            return 0;
        }
        case Diagnostic::shrinkage: {
            const SimData s = diagnostic_data(cfg);
            const auto po = path_options(cfg);
            const auto path = fit_path(s.train, PenaltySpec::lasso(), grid_for(s.train, cfg, po), po);
            const auto recs = shrinkage_decomposition(s.train, path);
            std::ostringstream os;
            os << "position,lambda,d_alpha,gamma_hat,gamma_tilde,shrink_term,gap\n";
            for (std::size_t k = 0; k < recs.size(); ++k) {
                const auto& r = recs[k];
                os << k << ',' << format_double(r.lambda) << ',' << r.d_alpha << ',' << format_double(r.gamma_hat) << ','
                   << format_double(r.gamma_tilde) << ',' << format_double(r.shrink_term) << ','
                   << format_double(r.gap) << '\n';
            }
            emit(cfg, os.str(), out);
            return 0;
        }
        case Diagnostic::theoretical_lambda: {
            const SimData s = diagnostic_data(cfg);
            const auto po = path_options(cfg);
            const auto pen = cfg.penalty_spec();
            const auto grid = grid_for(s.train, cfg, po);
            const int nc = cfg.n_c.value_or(default_nc(Method::cv_nv, cfg.family, s.train.n()));
            const auto plan = monte_carlo_splits(s.train.n(), nc, cfg.r, cfg.seed);
            std::vector<std::string> blocks(plan.splits.size());
            parallel_for(static_cast<int>(plan.splits.size()), cfg.threads, [&](int j) {
                const auto& sp = plan.splits[static_cast<std::size_t>(j)];
                const auto path = fit_path(subset_rows(s.train, sp.construction), pen, grid, po);
                std::ostringstream os;
                for (const auto& pt : theoretical_lambda_series(path, nc, cfg.sigma)) {
                    os << j << ',' << pt.position << ',' << pt.d_alpha << ',' << format_double(pt.lambda) << ','
                       << format_double(pt.ratio) << ',' << format_double(pt.shrink) << '\n';
                }
                blocks[static_cast<std::size_t>(j)] = os.str();
            });
            std::string text = "split,position,d_alpha,lambda,ratio,shrink\n";
            for (const auto& b : blocks) text += b;
            emit(cfg, text, out);
            return 0;
        }
    }
    return 0;
}

} // namespace detail

/// Runs one command; module errors become an error record on `err` and a nonzero status.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        cfg.validate();
        switch (cfg.command) {
            case Command::fit: return detail::run_fit(cfg, out);
            case Command::cv: return detail::run_cv(cfg, out, err);
            case Command::simulate: return detail::run_simulate(cfg, out);
            case Command::diagnose: return detail::run_diagnose(cfg, out);
        }
    } catch (const Error& e) {
        err << error_json(e.code(), e.what()).dump() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        err << error_json(ErrorCode::invalid_argument, e.what()).dump() << '\n';
        return static_cast<int>(ErrorCode::invalid_argument);
    }
    return 0;
}

} // namespace pathcv
