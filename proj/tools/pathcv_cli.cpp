#include <pathcv/cli.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace pathcv;

namespace {

struct Raw
{
    std::string family = "gaussian";
    std::string penalty = "lasso";
    std::string method = "ccv";
    std::string rule;
    std::string format = "json";
    std::string diagnostic;
};

void add_data_options(CLI::App* app, RunConfig& cfg, Raw& raw)
{
    app->add_option("--data", cfg.data_path, "CSV file with a header row");
    app->add_option("--response", cfg.response_column, "response column name")->capture_default_str();
    app->add_option("--family", raw.family, "gaussian | binomial")->capture_default_str();
    app->add_option("--penalty", raw.penalty, "lasso | scad | mcp")->capture_default_str();
    app->add_option("--gamma", cfg.gamma, "SCAD/MCP concavity (default 3)");
    app->add_option("--n-lambda", cfg.n_lambda, "grid size")->capture_default_str();
    app->add_option("--min-ratio", cfg.min_ratio, "smallest lambda / lambda_max");
    app->add_flag("--intercept", cfg.intercept, "fit an unpenalized intercept");
}

void add_output_options(CLI::App* app, RunConfig& cfg, Raw& raw)
{
    app->add_option("--output", cfg.output_path, "write the payload here instead of stdout");
    app->add_option("--format", raw.format, "json | csv")->capture_default_str();
    app->add_option("--threads", cfg.threads, "worker threads")->capture_default_str();
}

OutputFormat parse_format(const std::string& s)
{
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    detail::fail(ErrorCode::invalid_argument, "unknown format '" + s + "'");
}

Rule parse_rule(const std::string& s)
{
    if (s == "min") return Rule::min;
    if (s == "one_se" || s == "1se") return Rule::one_se;
    detail::fail(ErrorCode::invalid_argument, "unknown rule '" + s + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Penalized GLM paths and tuning-parameter selection"};
    app.require_subcommand(1);
    RunConfig cfg;
    Raw raw;

    auto* fit = app.add_subcommand("fit", "fit a penalized solution path");
    add_data_options(fit, cfg, raw);
    add_output_options(fit, cfg, raw);

    auto* cv = app.add_subcommand("cv", "select a model along the path");
    add_data_options(cv, cfg, raw);
    add_output_options(cv, cfg, raw);
    cv->add_option("--method", raw.method, "kfold | kfold_1se | cv_nv | ccv")->capture_default_str();
    cv->add_option("--k", cfg.k, "folds for kfold rules")->capture_default_str();
    cv->add_option("--nc", cfg.n_c, "construction-set size for cv_nv / ccv");
    cv->add_option("--r", cfg.r, "Monte-Carlo splits")->capture_default_str();
    cv->add_option("--seed", cfg.seed, "split seed")->capture_default_str();
    cv->add_option("--rule", raw.rule, "min | one_se (kfold)");
    cv->add_option("--size-cap", cfg.size_cap, "largest ccv candidate");

    auto* sim = app.add_subcommand("simulate", "run a simulation experiment from a JSON config");
    sim->add_option("--config", cfg.config_path, "experiment config (JSON)");
    sim->add_option("--output-dir", cfg.output_dir, "write aggregate.csv, reps.csv and table.txt here");
    sim->add_flag("--full-scale", cfg.full_scale, "100 replications and r = 50");
    sim->add_flag("--timing", cfg.timing, "add a runtime column to reps.csv");
    sim->add_option("--export-data", cfg.export_data, "write replication 0 as <prefix>_train.csv / _test.csv and stop");
    add_output_options(sim, cfg, raw);

    auto* diag = app.add_subcommand("diagnose", "analytic checks");
    diag->add_option("which", raw.diagnostic, "universal | order-stat | cr | shrinkage | theoretical-lambda")->required();
    add_data_options(diag, cfg, raw);
    add_output_options(diag, cfg, raw);
    diag->add_option("--n", cfg.n, "observations")->capture_default_str();
    diag->add_option("--p", cfg.p, "dimension")->capture_default_str();
    diag->add_option("--sigma", cfg.sigma, "noise sd")->capture_default_str();
    diag->add_option("--rho", cfg.rho, "AR(1) correlation")->capture_default_str();
    diag->add_option("--k", cfg.k, "folds (cr)")->capture_default_str();
    diag->add_option("--order-k", cfg.order_k, "order statistic k (order-stat)")->capture_default_str();
    diag->add_option("--order-l", cfg.order_l, "order statistic l (order-stat)")->capture_default_str();
    diag->add_option("--trials", cfg.trials, "Monte-Carlo trials (order-stat)")->capture_default_str();
    diag->add_option("--nc", cfg.n_c, "construction-set size (theoretical-lambda)");
    diag->add_option("--r", cfg.r, "splits (theoretical-lambda)")->capture_default_str();
    diag->add_option("--seed", cfg.seed, "seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << error_json(ErrorCode::invalid_argument, std::string("usage: ") + e.what()).dump() << '\n';
        return static_cast<int>(ErrorCode::invalid_argument);
    }

    try {
        if (*fit) cfg.command = Command::fit;
        if (*cv) cfg.command = Command::cv;
        if (*sim) cfg.command = Command::simulate;
        if (*diag) cfg.command = Command::diagnose;
        cfg.family = parse_family(raw.family).kind;
        cfg.penalty = parse_penalty(raw.penalty).kind;
        cfg.method = parse_method(raw.method);
        cfg.output_format = parse_format(raw.format);
        if (!raw.rule.empty()) cfg.rule = parse_rule(raw.rule);
        if (*diag) cfg.diagnostic = parse_diagnostic(raw.diagnostic);
    } catch (const Error& e) {
        std::cerr << error_json(e.code(), std::string("usage: ") + e.what()).dump() << '\n';
        return static_cast<int>(e.code());
    }
    return run(cfg);
}
