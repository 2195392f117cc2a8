#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chi2.hpp"
#include "ergmlasso/oracle.hpp"
#include "ergmlasso/sampler.hpp"

using namespace ergmlasso;
using Catch::Matchers::WithinAbs;

namespace {

ModelSpec edges_only() {
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    return spec;
}

ModelSpec edges_gwesp(double alpha = 0.5) {
    ModelSpec spec = edges_only();
    spec.terms.push_back({TermKind::Gwesp, alpha});
    return spec;
}

} // namespace

TEST_CASE("erdos-renyi sampler endpoints and mean") {
    auto empty = sample_er(10, 0.0, 5, 3);
    for (auto& net : empty) CHECK(net.edge_count() == 0);

    auto full = sample_er(10, 1.0, 5, 3);
    for (auto& net : full) CHECK(net.edge_count() == 45);

    const int n = 50, m = 2000;
    auto draws = sample_er(n, 0.2, m, 77);
    double mean = 0.0;
    for (auto& net : draws) mean += net.edge_count();
    mean /= m;
    // E = 245, SE = sqrt(D p (1-p) / m) ~ 0.31
    CHECK_THAT(mean, WithinAbs(245.0, 1.5));

    CHECK_THROWS_AS(sample_er(5, -0.1, 1, 1), UsageError);
}

TEST_CASE("edges-only chain hits the logistic density") {
    const int n = 12;
    const double d = static_cast<double>(dyad_count(n));
    auto spec = edges_only();
    Network start(n);

    SamplerConfig cfg;
    cfg.m = 400;
    cfg.seed = 11;
    cfg.init = SamplerConfig::Init::empty;

    SECTION("theta = 0 gives density one half") {
        std::vector<double> theta = {0.0};
        auto res = sample(spec, theta, start, nullptr, cfg);
        double mean = 0.0;
        for (auto& s : res.stats) mean += s[0];
        mean /= res.stats.size();
        CHECK_THAT(mean, WithinAbs(d / 2, 1.5));
    }

    SECTION("theta = -1.5 gives the setup-3 density") {
        std::vector<double> theta = {-1.5};
        auto res = sample(spec, theta, start, nullptr, cfg);
        double mean = 0.0;
        for (auto& s : res.stats) mean += s[0];
        mean /= res.stats.size();
        const double rho = std::exp(-1.5) / (1.0 + std::exp(-1.5)); // 0.1824
        CHECK_THAT(mean / d, WithinAbs(rho, 0.02));
    }
}

TEST_CASE("chain moments match the exact model within monte-carlo error") {
    const int n = 5;
    auto spec = edges_gwesp();
    ExactModel em(spec, nullptr, n);
    std::vector<double> theta = {-1.0, 0.5};
    auto mom = em.exact_moments(theta);

    SamplerConfig cfg;
    cfg.m = 3000;
    cfg.thin = 2 * dyad_count(n);
    cfg.seed = 4;
    cfg.init = SamplerConfig::Init::empty;
    auto res = sample(spec, theta, Network(n), nullptr, cfg);
    for (int k = 0; k < em.dim(); ++k) {
        double mean = 0.0;
        for (auto& s : res.stats) mean += s[k];
        mean /= res.stats.size();
        const double se = std::sqrt(mom.cov(k, k) / res.stats.size());
        CHECK_THAT(mean, WithinAbs(mom.mean[k], 3.0 * se + 1e-9));
    }
}

TEST_CASE("desk-scale state frequencies match exact probabilities") {
    // light version of the distribution-exactness check: all 8 graphs on 3
    // nodes, chi-squared against the enumerated distribution
    const int n = 3;
    auto spec = edges_gwesp();
    ExactModel em(spec, nullptr, n);
    std::vector<double> theta = {0.4, -0.3};
    auto probs = em.probabilities(theta);

    StatsEngine engine(spec, nullptr, n);
    MhChain chain(engine, Network(n), 12345);
    chain.set_theta(theta);
    chain.advance(2000);
    const long retained = 200000;
    std::vector<long> counts(probs.size(), 0);
    for (long t = 0; t < retained; ++t) {
        chain.advance(12);
        ++counts[chain.network().dyad_bitmask()];
    }
    CHECK(testref::chi2_gof_pvalue(counts, probs, retained) > 0.001);
}

TEST_CASE("incremental statistics equal recomputation at chain end") {
    const int n = 14;
    ModelSpec spec = edges_gwesp(0.5);
    spec.terms.push_back({TermKind::Gwnsp, 0.25});
    spec.terms.push_back({TermKind::Gwdegree, 1.0});
    spec.terms[1].scale = 3.0;
    spec.terms[2].scale = 0.5;

    StatsEngine engine(spec, nullptr, n);
    MhChain chain(engine, Network(n), 9);
    std::vector<double> theta = {-0.8, 0.3, 0.05, 0.1};
    chain.set_theta(theta);
    chain.advance(50000);

    auto maintained = chain.stats();
    auto fresh = engine.compute(chain.network());
    scale_stats(spec, fresh);
    CHECK(maintained[0] == fresh[0]); // integer statistic stays exact
    for (size_t k = 1; k < fresh.size(); ++k)
        CHECK_THAT(maintained[k], WithinAbs(fresh[k], 1e-6));
}

TEST_CASE("identical config gives identical draw sequences") {
    const int n = 8;
    auto spec = edges_gwesp();
    std::vector<double> theta = {-0.5, 0.2};
    SamplerConfig cfg;
    cfg.m = 50;
    cfg.seed = 314;
    auto a = sample(spec, theta, Network(n), nullptr, cfg, true);
    auto b = sample(spec, theta, Network(n), nullptr, cfg, true);
    REQUIRE(a.stats.size() == b.stats.size());
    for (size_t d = 0; d < a.stats.size(); ++d) {
        CHECK(a.stats[d] == b.stats[d]);
        CHECK(a.networks[d] == b.networks[d]);
    }
}

TEST_CASE("theta overflow raises a numerical error") {
    auto spec = edges_only();
    StatsEngine engine(spec, nullptr, 6);
    MhChain chain(engine, Network(6), 1);
    std::vector<double> theta = {std::numeric_limits<double>::infinity()};
    chain.set_theta(theta);
    CHECK_THROWS_AS(chain.advance(10), NumericalError);
}

TEST_CASE("theta length must match the spec") {
    auto spec = edges_gwesp();
    std::vector<double> theta = {0.0};
    SamplerConfig cfg;
    CHECK_THROWS_AS(sample(spec, theta, Network(4), nullptr, cfg), UsageError);
}
