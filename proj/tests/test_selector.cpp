#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ergmlasso/selector.hpp"

using namespace ergmlasso;
using Catch::Matchers::WithinAbs;

namespace {

ModelSpec spec3() {
    ModelSpec s;
    s.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    s.terms.push_back({TermKind::Gwesp, 0.5});
    s.terms.push_back({TermKind::Gwdegree, 0.5});
    return s;
}

Network fixture_net() {
    Network f(5);
    f.set_edge(0, 1, true);
    f.set_edge(0, 2, true);
    f.set_edge(1, 2, true);
    f.set_edge(2, 3, true);
    return f;
}

SgdConfig exact_cfg(int iters = 6000) {
    SgdConfig cfg;
    cfg.max_iters = iters;
    cfg.tol = 1e-6;
    cfg.window = 50;
    return cfg;
}

SgdConfig mcmc_cfg(std::uint64_t seed) {
    SgdConfig cfg;
    cfg.m_per_iter = 50;
    cfg.max_iters = 400;
    cfg.tol = 0.01;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("lambda grids validate and construct") {
    auto geo = LambdaGrid::geometric(10.0, 0.1, 5, true);
    REQUIRE(geo.values.size() == 6);
    CHECK_THAT(geo.values[0], WithinAbs(10.0, 1e-12));
    CHECK_THAT(geo.values[4], WithinAbs(0.1, 1e-12));
    CHECK(geo.values[5] == 0.0);
    geo.validate();

    auto lin = LambdaGrid::linear(4.0, 0.0, 5);
    CHECK(lin.values[2] == 2.0);
    lin.validate();

    LambdaGrid bad;
    bad.values = {1.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), UsageError);
    LambdaGrid neg;
    neg.values = {1.0, -0.5};
    CHECK_THROWS_AS(neg.validate(), UsageError);
    CHECK_THROWS_AS(LambdaGrid::geometric(1.0, 0.0, 5), UsageError);
}

TEST_CASE("doubling search brackets the exact full-shrinkage penalty") {
    auto spec = spec3();
    ExactModel em(spec, nullptr, 5);
    auto net = fixture_net();
    auto obs = compute_stats(net, nullptr, spec);
    const double exact = em.full_shrinkage_lambda(obs);

    ExactGradientSource src(em, obs);
    const double found =
        find_lambda_max(spec, src, exact_cfg(), default_theta0(spec, net));
    // all-zero at the found value, not all-zero at half of it
    CHECK(found >= exact * 0.99);
    CHECK(found <= exact * 2.01);
}

TEST_CASE("coefficient path: exact zeros above R_i, edges never zero") {
    auto spec = spec3();
    ExactModel em(spec, nullptr, 5);
    auto net = fixture_net();
    auto obs = compute_stats(net, nullptr, spec);

    ExactGradientSource src(em, obs);
    auto theta0 = default_theta0(spec, net);
    const double lam_max = find_lambda_max(spec, src, exact_cfg(), theta0);
    // stop above the near-MLE region and give the iteration a real budget:
    // the fixture statistics are collinear, so the walk toward lambda ~ 0
    // is a long march for a subgradient method
    SgdConfig path_cfg = exact_cfg(30000);
    path_cfg.eta0 = 0.3;
    auto grid = LambdaGrid::geometric(lam_max, lam_max / 25.0, 14);
    auto path = compute_path_with(spec, src, grid, path_cfg, theta0);

    REQUIRE(path.coef.size() == grid.values.size());
    CHECK(path.all_converged);
    for (size_t g = 0; g < grid.values.size(); ++g) {
        CHECK(path.coef[g][0] != 0.0); // unpenalized intercept
        for (int j = 1; j < spec.dim(); ++j) {
            if (path.never_selected(j)) {
                CHECK(path.coef[g][j] == 0.0);
            } else if (grid.values[g] > path.importance[j]) {
                CHECK(path.coef[g][j] == 0.0);
            }
        }
    }
    for (bool jump : path.jump_flag) CHECK_FALSE(jump);

    // grid importance ordering matches the exact activation ordering, and
    // each score sits within one grid step of the bisected activation
    const double act_gwesp = em.activation_lambda(obs, 1);
    const double act_gwdeg = em.activation_lambda(obs, 2);
    REQUIRE_FALSE(path.never_selected(1));
    REQUIRE_FALSE(path.never_selected(2));
    CHECK((act_gwesp > act_gwdeg) == (path.importance[1] > path.importance[2]));
    const double ratio = grid.values[0] / grid.values[1];
    for (int j : {1, 2}) {
        const double act = j == 1 ? act_gwesp : act_gwdeg;
        double below = 0.0, above = std::numeric_limits<double>::infinity();
        for (double v : grid.values) {
            if (v <= act && v > below) below = v;
            if (v > act && v < above) above = v;
        }
        CHECK(path.importance[j] <= above * ratio);
        CHECK(path.importance[j] >= below / ratio);
    }
}

TEST_CASE("single-point grid above full shrinkage selects nothing") {
    auto spec = spec3();
    ExactModel em(spec, nullptr, 5);
    auto net = fixture_net();
    auto obs = compute_stats(net, nullptr, spec);
    ExactGradientSource src(em, obs);
    LambdaGrid grid;
    grid.values = {em.full_shrinkage_lambda(obs) * 4.0};
    auto path = compute_path_with(spec, src, grid, exact_cfg(), default_theta0(spec, net));
    CHECK(path.never_selected(1));
    CHECK(path.never_selected(2));
    CHECK(path.coef[0][0] != 0.0);
}

TEST_CASE("ranking order and tie-breaks") {
    PathResult path;
    path.grid.values = {3.0, 2.0, 1.0};
    path.labels = {"edges", "a", "b", "c", "d"};
    path.penalized = {false, true, true, true, true};
    path.converged = {true, true, true};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    SECTION("distinct scores sort descending, never-selected last in spec order") {
        path.coef = {{1, 0.2, 0, 0, 0}, {1, 0.3, 0.1, 0, 0}, {1, 0.4, 0.2, 0, 0}};
        path.importance = {nan, 3.0, 2.0, nan, nan};
        path.first_sign = {0, 1, 1, 0, 0};
        auto order = rank(path);
        CHECK(order == std::vector<int>{1, 2, 3, 4});
    }

    SECTION("equal scores break on coefficient magnitude") {
        path.coef = {{1, 0, 0, 0, 0}, {1, 0.3, 0.9, 0, 0}, {1, 0.4, 1.0, 0, 0}};
        path.importance = {nan, 2.0, 2.0, nan, nan};
        path.first_sign = {0, 1, 1, 0, 0};
        auto order = rank(path);
        CHECK(order == std::vector<int>{2, 1, 3, 4});
    }
}

TEST_CASE("loglik at the anchor is the closed Bernoulli form") {
    Network net(6);
    net.set_edge(0, 1, true);
    net.set_edge(2, 3, true);
    net.set_edge(4, 5, true);
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    spec.terms.push_back({TermKind::Gwesp, 0.5});

    std::vector<double> anchor = {corrected_logit_density(net), 0.0};
    InferenceConfig inf;
    const double got = estimate_loglik(net, nullptr, spec, anchor, inf, 5);
    const double d = 15.0;
    const double expected =
        3.0 * anchor[0] - d * std::log1p(std::exp(anchor[0]));
    CHECK_THAT(got, WithinAbs(expected, 1e-12));
}

TEST_CASE("edges-only bridge matches the closed form") {
    Rng rng(12);
    const int n = 12;
    Network net(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(0.3)) net.set_edge(i, j, true);
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});

    // a point a short way from the anchor, as a fitted value would be
    std::vector<double> theta = {corrected_logit_density(net) + 0.02};
    InferenceConfig inf;
    inf.bridge_sample = 6000;
    const double got = estimate_loglik(net, nullptr, spec, theta, inf, 31);
    const double d = static_cast<double>(dyad_count(n));
    const double expected =
        net.edge_count() * theta[0] - d * std::log1p(std::exp(theta[0]));
    CHECK_THAT(got, WithinAbs(expected, 1e-3));
}

TEST_CASE("bridge matches the oracle log kappa on the 5-node fixture") {
    auto spec = spec3();
    ExactModel em(spec, nullptr, 5);
    auto net = fixture_net();
    auto obs = compute_stats(net, nullptr, spec);
    std::vector<double> theta = {-0.8, 0.45, 0.3};
    const double exact = em.loglik(obs, theta);
    InferenceConfig inf;
    const double got = estimate_loglik(net, nullptr, spec, theta, inf, 17);
    CHECK_THAT(got, WithinAbs(exact, 0.05));
}

TEST_CASE("bridge failures name the failing integration point") {
    Network net = fixture_net();
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    spec.terms.push_back({TermKind::Gwesp, 0.5});
    std::vector<double> theta = {0.0, std::numeric_limits<double>::infinity()};
    InferenceConfig inf;
    CHECK_THROWS_WITH(estimate_loglik(net, nullptr, spec, theta, inf, 3),
                      Catch::Matchers::ContainsSubstring("u="));
}

TEST_CASE("edges-only refit: closed-form SE and loglik") {
    Rng rng(3);
    const int n = 18;
    Network net(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(0.3)) net.set_edge(i, j, true);
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});

    SgdConfig cfg = mcmc_cfg(21);
    InferenceConfig inf;
    inf.cov_sample = 3000;
    auto rep = refit_inference(net, nullptr, spec, cfg, inf);
    REQUIRE(rep.converged);

    const double d = static_cast<double>(dyad_count(n));
    const double closed =
        net.edge_count() * rep.coef_scaled[0] - d * std::log1p(std::exp(rep.coef_scaled[0]));
    CHECK_THAT(rep.loglik, WithinAbs(closed, 1e-3));
    CHECK_THAT(rep.aic, WithinAbs(2.0 - 2.0 * rep.loglik, 1e-12));

    const double p = 1.0 / (1.0 + std::exp(-rep.coef_scaled[0]));
    const double se_closed = 1.0 / std::sqrt(d * p * (1 - p));
    CHECK_THAT(rep.se_scaled[0] / se_closed, WithinAbs(1.0, 0.1));
    CHECK(rep.p_value[0] >= 0.0);
    CHECK(rep.p_value[0] <= 1.0);
}

TEST_CASE("refit SE on the 5-node fixture tracks the oracle information") {
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    spec.terms.push_back({TermKind::Gwesp, 0.5});
    ExactModel em(spec, nullptr, 5);
    Network net = fixture_net();
    net.set_edge(3, 4, true);
    auto obs = compute_stats(net, nullptr, spec);

    SgdConfig cfg = mcmc_cfg(5);
    cfg.max_iters = 2000;
    cfg.m_per_iter = 150;
    cfg.tol = 0.004;
    // the inverse covariance amplifies sampling noise by the statistic
    // collinearity, so the SE check needs a long, well-thinned sample
    InferenceConfig inf;
    inf.cov_sample = 40000;
    auto rep = refit_inference(net, nullptr, spec, cfg, inf);
    REQUIRE(rep.converged);

    auto mle = em.exact_mle(obs);
    auto mom = em.exact_moments(mle);
    Eigen::MatrixXd inv = mom.cov.inverse();
    for (int j = 0; j < 2; ++j)
        CHECK_THAT(rep.se_scaled[j] / std::sqrt(inv(j, j)), WithinAbs(1.0, 0.1));
}

TEST_CASE("collinear statistics raise a collinearity error naming terms") {
    Rng rng(9);
    const int n = 12;
    Network net(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(0.35)) net.set_edge(i, j, true);

    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    AttributeTable attrs(ids);
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
        x.push_back(static_cast<double>(i % 4));
        y.push_back(2.0 * (i % 4));
    }
    attrs.add_numeric("x", x);
    attrs.add_numeric("y", y);

    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    spec.terms.push_back({TermKind::NodeCov, 0.5, "x"});
    spec.terms.push_back({TermKind::NodeCov, 0.5, "y"});

    SgdConfig cfg = mcmc_cfg(2);
    cfg.max_iters = 40; // the error comes from the covariance, not the fit
    CHECK_THROWS_WITH(refit_inference(net, &attrs, spec, cfg),
                      Catch::Matchers::ContainsSubstring("nodecov"));
}

TEST_CASE("AIC walk on the fixture is deterministic and well-formed") {
    auto spec = spec3();
    Network net = fixture_net();
    auto obs_spec = standardize(spec, net, nullptr, 300, 77).spec;

    SgdConfig cfg = mcmc_cfg(13);
    StatsEngine engine(obs_spec, nullptr, 5);
    auto obs = engine.compute(net);
    scale_stats(obs_spec, obs);

    auto run_once = [&]() {
        McmcGradientSource src(engine, net, obs, cfg);
        auto theta0 = default_theta0(obs_spec, net);
        const double lam_max = find_lambda_max(obs_spec, src, cfg, theta0);
        auto grid = default_grid(lam_max, 10, 50.0);
        auto path = compute_path_with(obs_spec, src, grid, cfg, theta0);
        return select_threshold(path, net, nullptr, obs_spec, Criterion::aic, 0.05, cfg);
    };
    auto a = run_once();
    auto b = run_once();
    CHECK(a.selected == b.selected);
    CHECK(a.report.aic == b.report.aic);
    CHECK(a.report.coef_scaled == b.report.coef_scaled);

    REQUIRE(!a.walk.empty());
    CHECK(a.walk.front().added == "edges");
    // every accepted step lowers AIC; the walk ends at the first that fails
    for (size_t s = 1; s + 1 < a.walk.size(); ++s)
        if (a.walk[s].accepted) CHECK(a.walk[s].aic < a.walk[s - 1].aic);
    if (!a.walk.back().accepted && a.walk.back().note.empty())
        CHECK(a.walk.back().aic >= a.walk[a.walk.size() - 2].aic);
}

TEST_CASE("p-value walk respects the significance cut") {
    auto spec = spec3();
    Network net = fixture_net();
    auto obs_spec = standardize(spec, net, nullptr, 300, 78).spec;
    SgdConfig cfg = mcmc_cfg(14);

    StatsEngine engine(obs_spec, nullptr, 5);
    auto obs = engine.compute(net);
    scale_stats(obs_spec, obs);
    McmcGradientSource src(engine, net, obs, cfg);
    auto theta0 = default_theta0(obs_spec, net);
    const double lam_max = find_lambda_max(obs_spec, src, cfg, theta0);
    auto path = compute_path_with(obs_spec, src, default_grid(lam_max, 10, 50.0), cfg,
                                  theta0);
    auto sel = select_threshold(path, net, nullptr, obs_spec, Criterion::pvalue, 0.05,
                                cfg);
    for (size_t s = 1; s < sel.walk.size(); ++s)
        if (sel.walk[s].accepted) CHECK(sel.walk[s].p_added <= 0.05);
}
