#include <iostream>

#include <CLI11.hpp>

#include "ergmlasso/commands.hpp"

using ergmlasso::RunConfig;

namespace {

void add_common_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--edges", cfg.edges_path, "edge list file");
    sub->add_option("--attrs", cfg.attrs_path, "node attribute CSV");
    sub->add_option("--spec", cfg.spec_path, "model spec JSON");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--seed", cfg.seed, "RNG seed (default 1729)");
    sub->add_option("--workers", cfg.workers, "worker threads (0 = all cores)");
    sub->add_flag("--force", cfg.force, "overwrite an existing run directory");
    sub->add_option("--burn-in", cfg.burn_in, "sampler burn-in attempts");
    sub->add_option("--thin", cfg.thin, "attempts between retained draws");
    sub->add_option("--m-per-iter", cfg.m_per_iter, "sample size per SGD step");
    sub->add_option("--max-iters", cfg.max_iters, "SGD iteration cap");
    sub->add_option("--chains", cfg.n_chains, "parallel sampling chains per fit");
    sub->add_option("--tol", cfg.tol, "SGD convergence tolerance");
    sub->add_option("--eta0", cfg.eta0, "base learning rate (default: auto)");
    sub->add_option("--m-standardize", cfg.m_standardize,
                    "reference-sample size for standardization");
    sub->add_option("--cov-sample", cfg.cov_sample, "draws for SE covariance");
    sub->add_option("--bridge-points", cfg.bridge_points,
                    "path-sampling grid intervals");
    sub->add_option("--bridge-sample", cfg.bridge_sample,
                    "draws per path-sampling node");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LASSO-based variable selection for exponential random graph models"};
    app.require_subcommand(1);

    RunConfig cfg;

    auto* fit = app.add_subcommand("fit", "standardize, fit unpenalized, report inference");
    auto* path = app.add_subcommand("path", "trace the coefficient path over a lambda grid");
    auto* select = app.add_subcommand("select",
                                      "path, ranking, threshold walk, final refit");
    auto* simulate = app.add_subcommand("simulate", "draw networks from a given model");
    auto* exact = app.add_subcommand("exact", "brute-force oracle outputs (tiny networks)");
    auto* standardize = app.add_subcommand("standardize",
                                           "write the spec with standardization scales");

    for (auto* sub : {fit, path, select, simulate, exact, standardize})
        add_common_options(sub, cfg);

    for (auto* sub : {path, select}) {
        sub->add_option("--lambda-grid", cfg.lambda_grid,
                        "auto | geo:MAX,MIN,N | lin:MAX,MIN,N | list:v1,v2,...");
        sub->add_option("--grid-points", cfg.grid_points, "points in the auto grid");
        sub->add_option("--grid-span", cfg.grid_span,
                        "auto grid covers lambda_max down to lambda_max/span");
        sub->add_flag("--plot", cfg.plot, "write an SVG of the coefficient path");
    }
    select->add_option("--criterion", cfg.criterion, "aic | pvalue");
    select->add_option("--alpha-sig", cfg.alpha_sig, "significance level for pvalue mode");

    simulate->add_option("--theta", cfg.theta, "generating coefficients, one per term")
        ->delimiter(',');
    simulate->add_option("--count", cfg.sim_count, "number of networks to draw");
    simulate->add_option("--nodes", cfg.sim_nodes, "network size when no --attrs given");
    simulate->add_option("--init-density", cfg.init_density, "chain start density");
    simulate->add_option("--attr-probs", cfg.attr_probs,
                         "p_none,p_one,p_both: attribute-driven Bernoulli generator");
    simulate->add_option("--attr-col", cfg.attr_column, "attribute column for --attr-probs");

    exact->add_option("--theta", cfg.theta, "evaluation point for log-kappa and moments")
        ->delimiter(',');
    exact->add_option("--grid-points", cfg.grid_points, "points in the exact path grid");
    exact->add_option("--grid-span", cfg.grid_span, "exact path grid span");

    CLI11_PARSE(app, argc, argv);

    cfg.command = app.get_subcommands().front()->get_name();
    try {
        return ergmlasso::run_command(cfg);
    } catch (const ergmlasso::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ergmlasso::ExitCode::numerical);
    }
}
