#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ergmlasso/attributes.hpp"
#include "ergmlasso/graph.hpp"
#include "ergmlasso/model.hpp"
#include "ergmlasso/oracle.hpp"
#include "ergmlasso/selector.hpp"
#include "ergmlasso/standardize.hpp"
#include "ergmlasso/svg.hpp"
#include "ergmlasso/textio.hpp"

namespace ergmlasso {

inline constexpr int defaults_version = 1;
inline constexpr std::uint64_t default_seed = 1729;

struct RunConfig {
    std::string command;
    std::string edges_path, attrs_path, spec_path, out_dir;
    std::uint64_t seed = default_seed;
    int workers = 0; // 0 = hardware concurrency
    bool plot = false;
    bool force = false;

    // sampler / SGD overrides; negative means module default
    long burn_in = -1, thin = -1;
    int m_per_iter = -1, max_iters = -1, n_chains = 1;
    double tol = -1.0, eta0 = -1.0;
    int m_standardize = 500;

    // lambda grid: auto | geo:MAX,MIN,N | lin:MAX,MIN,N | list:v1,v2,...
    std::string lambda_grid = "auto";
    int grid_points = 40;
    double grid_span = 100.0;

    std::string criterion = "aic";
    double alpha_sig = 0.05;

    // inference
    int cov_sample = 4000, bridge_points = 20, bridge_sample = 1000;

    // simulate / exact
    std::vector<double> theta;
    int sim_count = 1;
    int sim_nodes = 0;
    double init_density = 0.1;
    std::string attr_probs; // "p0,p1,p2" -> attribute-driven Bernoulli generator
    std::string attr_column;
};

struct Inputs {
    LabeledNetwork network;
    std::optional<AttributeTable> attrs;
    ModelSpec spec;

    const AttributeTable* attrs_ptr() const {
        return attrs.has_value() ? &*attrs : nullptr;
    }
};

inline SgdConfig make_sgd_config(const RunConfig& cfg) {
    SgdConfig out;
    out.seed = cfg.seed;
    out.n_chains = cfg.n_chains;
    if (cfg.burn_in >= 0) out.burn_in = cfg.burn_in;
    if (cfg.thin >= 0) out.thin = cfg.thin;
    if (cfg.m_per_iter > 0) out.m_per_iter = cfg.m_per_iter;
    if (cfg.max_iters > 0) out.max_iters = cfg.max_iters;
    if (cfg.tol > 0) out.tol = cfg.tol;
    if (cfg.eta0 > 0) out.eta0 = cfg.eta0;
    out.workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
    return out;
}

inline InferenceConfig make_inference_config(const RunConfig& cfg) {
    InferenceConfig inf;
    inf.cov_sample = cfg.cov_sample;
    inf.bridge_points = cfg.bridge_points;
    inf.bridge_sample = cfg.bridge_sample;
    return inf;
}

inline Inputs load_inputs(const RunConfig& cfg, bool need_network = true) {
    if (cfg.spec_path.empty()) throw InputError("missing --spec");
    SpecFile file = load_spec_file(cfg.spec_path);
    Inputs in;
    if (!cfg.attrs_path.empty())
        in.attrs = AttributeTable::load_csv_file(cfg.attrs_path, file.schema);
    else if (!file.schema.columns.empty())
        throw InputError("model spec declares attribute columns; provide --attrs");
    if (need_network) {
        if (cfg.edges_path.empty()) throw InputError("missing --edges");
        in.network = load_edge_list_file(
            cfg.edges_path, in.attrs ? in.attrs->node_ids() : std::vector<std::string>{});
    } else if (!in.attrs && cfg.sim_nodes <= 0) {
        throw InputError("need --nodes or --attrs to size the network");
    }
    in.spec = resolve_spec(file, in.attrs_ptr());
    return in;
}

inline std::filesystem::path prepare_outdir(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw InputError("missing --out");
    std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    if (std::filesystem::exists(dir / "manifest.json") && !cfg.force)
        throw InputError("output directory '" + cfg.out_dir +
                         "' already holds a run; pass --force to overwrite");
    return dir;
}

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["command"] = cfg.command;
    j["defaults_version"] = defaults_version;
    j["seed"] = cfg.seed;
    j["inputs"] = {{"edges", cfg.edges_path},
                   {"attrs", cfg.attrs_path},
                   {"spec", cfg.spec_path}};
    j["config"] = {{"workers", cfg.workers},
                   {"burn_in", cfg.burn_in},
                   {"thin", cfg.thin},
                   {"m_per_iter", cfg.m_per_iter},
                   {"max_iters", cfg.max_iters},
                   {"n_chains", cfg.n_chains},
                   {"tol", cfg.tol},
                   {"eta0", cfg.eta0},
                   {"m_standardize", cfg.m_standardize},
                   {"lambda_grid", cfg.lambda_grid},
                   {"grid_points", cfg.grid_points},
                   {"grid_span", cfg.grid_span},
                   {"criterion", cfg.criterion},
                   {"alpha_sig", cfg.alpha_sig},
                   {"cov_sample", cfg.cov_sample},
                   {"bridge_points", cfg.bridge_points},
                   {"bridge_sample", cfg.bridge_sample},
                   {"plot", cfg.plot}};
    auto out = open_output((dir / "manifest.json").string());
    out << j.dump(2) << '\n';
}

inline nlohmann::ordered_json report_to_json(const FitReport& rep) {
    nlohmann::ordered_json j;
    j["terms"] = nlohmann::ordered_json::array();
    for (size_t k = 0; k < rep.labels.size(); ++k) {
        nlohmann::ordered_json t;
        t["label"] = rep.labels[k];
        t["coef_scaled"] = rep.coef_scaled[k];
        t["coef_raw"] = rep.coef_raw[k];
        t["se_scaled"] = rep.se_scaled[k];
        t["se_raw"] = rep.se_raw[k];
        t["p_value"] = rep.p_value[k];
        t["scale"] = rep.scales[k];
        j["terms"].push_back(std::move(t));
    }
    j["loglik"] = rep.loglik;
    j["aic"] = rep.aic;
    j["n_params"] = rep.n_params;
    j["converged"] = rep.converged;
    j["excluded_terms"] = rep.excluded;
    return j;
}

inline void write_report(const std::filesystem::path& dir, const FitReport& rep) {
    auto out = open_output((dir / "report.json").string());
    out << report_to_json(rep).dump(2) << '\n';
}

inline void write_path_csvs(const std::filesystem::path& dir, const PathResult& path) {
    {
        auto out = open_output((dir / "path_scaled.csv").string());
        CsvWriter csv(out);
        std::vector<std::string> head = {"lambda"};
        for (auto& l : path.labels) head.push_back(l);
        csv.row(head);
        for (size_t g = 0; g < path.grid.values.size(); ++g) {
            std::vector<std::string> row = {format_double(path.grid.values[g])};
            for (double v : path.coef[g]) row.push_back(format_double(v));
            csv.row(row);
        }
    }
    {
        auto out = open_output((dir / "path_raw.csv").string());
        CsvWriter csv(out);
        std::vector<std::string> head = {"lambda"};
        for (auto& l : path.labels) head.push_back(l);
        csv.row(head);
        for (size_t g = 0; g < path.grid.values.size(); ++g) {
            std::vector<std::string> row = {format_double(path.grid.values[g])};
            for (size_t j = 0; j < path.coef[g].size(); ++j)
                row.push_back(format_double(path.coef[g][j] / path.scales[j]));
            csv.row(row);
        }
    }
}

inline void write_ranking_csv(const std::filesystem::path& dir, const PathResult& path,
                              const std::vector<int>& ranking) {
    auto out = open_output((dir / "ranking.csv").string());
    CsvWriter csv(out);
    csv.row({"term", "importance_score", "first_sign"});
    for (int j : ranking) {
        csv.row({path.labels[j],
                 path.never_selected(j) ? "never" : format_double(path.importance[j]),
                 std::to_string(path.first_sign[j])});
    }
}

inline void write_walk_csv(const std::filesystem::path& dir,
                           const std::vector<WalkStep>& walk) {
    auto out = open_output((dir / "walk.csv").string());
    CsvWriter csv(out);
    csv.row({"term", "aic", "p_value", "accepted", "note"});
    for (const auto& s : walk)
        csv.row({s.added, format_double(s.aic), format_double(s.p_added),
                 s.accepted ? "1" : "0", s.note});
}

inline LambdaGrid resolve_grid(const RunConfig& cfg, const ModelSpec& spec,
                               GradientSource& src, const SgdConfig& sgd,
                               const std::vector<double>& theta0) {
    const std::string& s = cfg.lambda_grid;
    auto parse_triple = [&](const std::string& body) {
        std::istringstream ss(body);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw InputError("bad --lambda-grid '" + s + "'");
        return std::tuple<double, double, int>{std::stod(a), std::stod(b), std::stoi(c)};
    };
    if (s == "auto") {
        const double lam = find_lambda_max(spec, src, sgd, theta0);
        return default_grid(lam, cfg.grid_points, cfg.grid_span);
    }
    if (s.rfind("geo:", 0) == 0) {
        auto [top, bottom, count] = parse_triple(s.substr(4));
        return LambdaGrid::geometric(top, bottom, count);
    }
    if (s.rfind("lin:", 0) == 0) {
        auto [top, bottom, count] = parse_triple(s.substr(4));
        return LambdaGrid::linear(top, bottom, count);
    }
    if (s.rfind("list:", 0) == 0) {
        LambdaGrid g;
        std::istringstream ss(s.substr(5));
        std::string item;
        while (std::getline(ss, item, ',')) g.values.push_back(std::stod(item));
        g.validate();
        return g;
    }
    throw InputError("bad --lambda-grid '" + s + "'");
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the process exit code.
// ---------------------------------------------------------------------------

inline int cmd_standardize(const RunConfig& cfg) {
    Inputs in = load_inputs(cfg);
    auto dir = prepare_outdir(cfg);
    auto res = standardize(in.spec, in.network.net, in.attrs_ptr(), cfg.m_standardize,
                           cfg.seed);
    {
        auto out = open_output((dir / "spec_standardized.json").string());
        out << spec_to_json(res.spec).dump(2) << '\n';
    }
    {
        auto out = open_output((dir / "stat_sd.csv").string());
        CsvWriter csv(out);
        csv.row({"term", "sd", "excluded"});
        auto labels = res.spec.labels();
        for (size_t k = 0; k < labels.size(); ++k)
            csv.row({labels[k], format_double(res.stat_sd[k]),
                     res.spec.terms[k].excluded ? "1" : "0"});
    }
    for (auto& l : res.excluded)
        std::cerr << "warning: term '" << l
                  << "' has zero reference-sample SD; excluded from penalized fitting\n";
    write_manifest(dir, cfg);
    return 0;
}

inline int cmd_fit(const RunConfig& cfg) {
    Inputs in = load_inputs(cfg);
    auto dir = prepare_outdir(cfg);
    auto std_res = standardize(in.spec, in.network.net, in.attrs_ptr(),
                               cfg.m_standardize, cfg.seed);
    SgdConfig sgd = make_sgd_config(cfg);
    FitTrace trace;
    FitReport rep = refit_inference(in.network.net, in.attrs_ptr(), std_res.spec, sgd,
                                    make_inference_config(cfg), &trace);
    rep.excluded = std_res.excluded;
    write_report(dir, rep);
    {
        auto out = open_output((dir / "trace.csv").string());
        trace.write_csv(out, std_res.spec.labels());
    }
    write_manifest(dir, cfg);
    if (!rep.converged) {
        std::cerr << "error: fit did not converge within max_iters\n";
        return static_cast<int>(ExitCode::nonconvergence);
    }
    return 0;
}

struct PathOutputs {
    StandardizeResult standardized;
    PathResult path;
    std::vector<int> ranking;
};

inline PathOutputs run_path_stage(const RunConfig& cfg, const Inputs& in) {
    PathOutputs out;
    out.standardized = standardize(in.spec, in.network.net, in.attrs_ptr(),
                                   cfg.m_standardize, cfg.seed);
    const ModelSpec& spec = out.standardized.spec;
    SgdConfig sgd = make_sgd_config(cfg);
    StatsEngine engine(spec, in.attrs_ptr(), in.network.net.n_nodes());
    auto obs = engine.compute(in.network.net);
    scale_stats(spec, obs);
    McmcGradientSource src(engine, in.network.net, obs, sgd);
    auto theta0 = default_theta0(spec, in.network.net);
    LambdaGrid grid = resolve_grid(cfg, spec, src, sgd, theta0);
    out.path = compute_path_with(spec, src, grid, sgd, theta0);
    out.ranking = rank(out.path);
    if (!out.path.all_converged)
        std::cerr << "warning: some grid fits did not converge; importance scores "
                     "use converged points only\n";
    return out;
}

inline int cmd_path(const RunConfig& cfg) {
    Inputs in = load_inputs(cfg);
    auto dir = prepare_outdir(cfg);
    PathOutputs stage = run_path_stage(cfg, in);
    write_path_csvs(dir, stage.path);
    write_ranking_csv(dir, stage.path, stage.ranking);
    if (cfg.plot) {
        auto out = open_output((dir / "path.svg").string());
        write_path_svg(out, stage.path);
    }
    write_manifest(dir, cfg);
    return 0;
}

inline int cmd_select(const RunConfig& cfg) {
    Inputs in = load_inputs(cfg);
    auto dir = prepare_outdir(cfg);
    PathOutputs stage = run_path_stage(cfg, in);
    write_path_csvs(dir, stage.path);
    write_ranking_csv(dir, stage.path, stage.ranking);
    if (cfg.plot) {
        auto out = open_output((dir / "path.svg").string());
        write_path_svg(out, stage.path);
    }
    Criterion crit;
    if (cfg.criterion == "aic") crit = Criterion::aic;
    else if (cfg.criterion == "pvalue") crit = Criterion::pvalue;
    else throw InputError("criterion must be aic or pvalue");
    SelectionResult sel =
        select_threshold(stage.path, in.network.net, in.attrs_ptr(),
                         stage.standardized.spec, crit, cfg.alpha_sig,
                         make_sgd_config(cfg), make_inference_config(cfg));
    write_walk_csv(dir, sel.walk);
    write_report(dir, sel.report);
    write_manifest(dir, cfg);
    if (!sel.report.converged) return static_cast<int>(ExitCode::nonconvergence);
    return 0;
}

inline int cmd_simulate(const RunConfig& cfg) {
    if (cfg.spec_path.empty()) throw InputError("missing --spec");
    SpecFile file = load_spec_file(cfg.spec_path);
    std::optional<AttributeTable> attrs;
    if (!cfg.attrs_path.empty())
        attrs = AttributeTable::load_csv_file(cfg.attrs_path, file.schema);
    const AttributeTable* attrs_ptr = attrs ? &*attrs : nullptr;
    ModelSpec spec = resolve_spec(file, attrs_ptr);

    int n = cfg.sim_nodes;
    if (n <= 0 && attrs) n = attrs->n_nodes();
    if (n <= 0) throw InputError("need --nodes (or --attrs) for simulation");
    auto dir = prepare_outdir(cfg);

    std::vector<std::string> ids;
    if (attrs) ids = attrs->node_ids();
    else
        for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));

    nlohmann::ordered_json truth;
    truth["n_nodes"] = n;
    truth["count"] = cfg.sim_count;
    truth["terms"] = spec.labels();

    std::vector<Network> nets(cfg.sim_count, Network(n));
    if (!cfg.attr_probs.empty()) {
        // Dyad-independent generator: tie probability set by how many
        // endpoints carry the attribute (none / one / both).
        if (cfg.attr_column.empty())
            throw InputError("--attr-probs needs --attr-col");
        if (!attrs) throw InputError("--attr-probs needs --attrs");
        std::istringstream ss(cfg.attr_probs);
        std::string tok;
        std::vector<double> probs;
        while (std::getline(ss, tok, ',')) probs.push_back(std::stod(tok));
        if (probs.size() != 3)
            throw InputError("--attr-probs wants three comma-separated probabilities");
        const auto& cat = attrs->categorical(cfg.attr_column);
        const int one = cat.code_of("1");
        if (one < 0)
            throw InputError("--attr-probs column must have a level named '1'");
        for (int d = 0; d < cfg.sim_count; ++d) {
            Rng rng(derive_seed(cfg.seed, d));
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    const int k = (cat.codes[i] == one) + (cat.codes[j] == one);
                    if (rng.bernoulli(probs[k])) nets[d].set_edge(i, j, true);
                }
        }
        truth["generator"] = "attribute_bernoulli";
        truth["attr_column"] = cfg.attr_column;
        truth["tie_probs"] = probs;
    } else {
        if (static_cast<int>(cfg.theta.size()) != spec.dim())
            throw InputError("--theta must list one value per spec term");
        SamplerConfig scfg;
        scfg.init = SamplerConfig::Init::er_density;
        scfg.er_density = cfg.init_density;
        scfg.burn_in = cfg.burn_in >= 0 ? cfg.burn_in : 100 * dyad_count(n);
        if (cfg.thin >= 0) scfg.thin = cfg.thin;
        scfg.m = 1;
        StatsEngine engine(spec, attrs_ptr, n);
        // independent chains with per-draw seeds; the output is the same for
        // any worker count
        auto draw_one = [&](int d) {
            SamplerConfig one = scfg;
            one.seed = derive_seed(cfg.seed, d);
            Network start = initial_network(one, Network(n), one.seed);
            MhChain chain(engine, start, one.seed);
            chain.set_theta(cfg.theta);
            chain.advance(one.burn_for(dyad_count(n)));
            nets[d] = chain.network();
        };
        const int workers = std::max(
            1, cfg.workers > 0 ? cfg.workers
                               : static_cast<int>(std::thread::hardware_concurrency()));
        if (workers > 1 && cfg.sim_count > 1) {
            std::vector<std::future<void>> jobs;
            for (int w = 0; w < workers; ++w)
                jobs.push_back(std::async(std::launch::async, [&, w]() {
                    for (int d = w; d < cfg.sim_count; d += workers) draw_one(d);
                }));
            for (auto& j : jobs) j.get();
        } else {
            for (int d = 0; d < cfg.sim_count; ++d) draw_one(d);
        }
        truth["generator"] = "ergm";
        truth["theta"] = cfg.theta;
        truth["init_density"] = cfg.init_density;
    }

    char name[32];
    for (int d = 0; d < cfg.sim_count; ++d) {
        std::snprintf(name, sizeof(name), "net_%04d.edges", d);
        write_edge_list_file((dir / name).string(), nets[d], ids);
    }
    {
        auto out = open_output((dir / "truth.json").string());
        out << truth.dump(2) << '\n';
    }
    write_manifest(dir, cfg);
    return 0;
}

inline int cmd_exact(const RunConfig& cfg) {
    Inputs in = load_inputs(cfg);
    auto dir = prepare_outdir(cfg);
    const int n = in.network.net.n_nodes();
    ExactModel em(in.spec, in.attrs_ptr(), n);
    StatsEngine engine(in.spec, in.attrs_ptr(), n);
    auto obs = engine.compute(in.network.net);
    scale_stats(in.spec, obs);

    std::vector<double> theta = cfg.theta;
    if (theta.empty()) theta.assign(in.spec.dim(), 0.0);
    if (static_cast<int>(theta.size()) != in.spec.dim())
        throw InputError("--theta must list one value per spec term");

    nlohmann::ordered_json j;
    j["n_nodes"] = n;
    j["terms"] = in.spec.labels();
    j["observed_scaled"] = obs;
    j["theta"] = theta;
    j["log_kappa"] = em.log_kappa(theta);
    auto mom = em.exact_moments(theta);
    j["mean"] = mom.mean;
    std::vector<std::vector<double>> cov(em.dim(), std::vector<double>(em.dim()));
    for (int a = 0; a < em.dim(); ++a)
        for (int b = 0; b < em.dim(); ++b) cov[a][b] = mom.cov(a, b);
    j["covariance"] = cov;
    try {
        j["mle"] = em.exact_mle(obs);
    } catch (const Error& e) {
        j["mle_error"] = e.what();
    }

    const double lam_max = em.full_shrinkage_lambda(obs);
    j["lambda_max"] = lam_max;
    nlohmann::ordered_json act = nlohmann::ordered_json::object();
    for (int t = 1; t < in.spec.dim(); ++t)
        if (in.spec.terms[t].penalized && !in.spec.terms[t].excluded)
            act[in.spec.labels()[t]] = em.activation_lambda(obs, t);
    j["activation_lambda"] = std::move(act);
    {
        auto out = open_output((dir / "exact.json").string());
        out << j.dump(2) << '\n';
    }

    if (lam_max > 0) {
        LambdaGrid grid = default_grid(lam_max * 1.05, std::min(cfg.grid_points, 40),
                                       cfg.grid_span);
        auto out = open_output((dir / "exact_path.csv").string());
        CsvWriter csv(out);
        std::vector<std::string> head = {"lambda"};
        for (auto& l : in.spec.labels()) head.push_back(l);
        csv.row(head);
        for (double lam : grid.values) {
            auto th = em.exact_penalized(obs, lam);
            std::vector<std::string> row = {format_double(lam)};
            for (double v : th) row.push_back(format_double(v));
            csv.row(row);
        }
    }
    write_manifest(dir, cfg);
    return 0;
}

inline int run_command(const RunConfig& cfg) {
    if (cfg.command == "fit") return cmd_fit(cfg);
    if (cfg.command == "path") return cmd_path(cfg);
    if (cfg.command == "select") return cmd_select(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "exact") return cmd_exact(cfg);
    if (cfg.command == "standardize") return cmd_standardize(cfg);
    throw InputError("unknown command '" + cfg.command + "'");
}

} // namespace ergmlasso
