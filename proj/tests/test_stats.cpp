#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ergmlasso/rng.hpp"
#include "ergmlasso/standardize.hpp"
#include "ergmlasso/stats.hpp"
#include "naive_stats.hpp"

using namespace ergmlasso;
using Catch::Matchers::WithinAbs;

namespace {

ModelSpec structural_spec(std::initializer_list<StatTerm> extra) {
    ModelSpec spec;
    spec.terms.push_back({TermKind::Edges, 0.5, "", "", 1.0, false});
    for (const auto& t : extra) spec.terms.push_back(t);
    return spec;
}

Network random_network(int n, double density, Rng& rng) {
    Network net(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(density)) net.set_edge(i, j, true);
    return net;
}

AttributeTable binary_attrs(int n, Rng& rng) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    AttributeTable t(ids);
    CategoricalColumn group;
    group.levels = {"0", "1"};
    group.reference_code = 0;
    std::vector<double> weight;
    for (int i = 0; i < n; ++i) {
        group.codes.push_back(rng.bernoulli(0.5) ? 1 : 0);
        weight.push_back(static_cast<double>(rng.uniform_below(7)));
    }
    t.add_categorical("group", group);
    t.add_numeric("weight", weight);
    return t;
}

ModelSpec full_spec() {
    ModelSpec spec = structural_spec({{TermKind::Gwesp, 0.5},
                                      {TermKind::Gwnsp, 0.25},
                                      {TermKind::Gwdegree, 1.0}});
    spec.terms.push_back({TermKind::NodeCov, 0.5, "weight"});
    spec.terms.push_back({TermKind::NodeFactor, 0.5, "group", "1"});
    spec.terms.push_back({TermKind::NodeMatch, 0.5, "group"});
    return spec;
}

} // namespace

TEST_CASE("triangle: gwesp equals edge count for any decay") {
    Network k3(3);
    k3.set_edge(0, 1, true);
    k3.set_edge(0, 2, true);
    k3.set_edge(1, 2, true);
    for (double alpha : {0.25, 0.5, 1.0, 2.0}) {
        auto spec = structural_spec({{TermKind::Gwesp, alpha}});
        auto s = compute_stats(k3, nullptr, spec);
        CHECK(s[0] == 3.0);
        // every edge has exactly one shared partner and
        // e^a (1 - (1 - e^-a)^1) = 1
        CHECK_THAT(s[1], WithinAbs(3.0, 1e-12));
    }
}

TEST_CASE("4-cycle gwnsp") {
    Network cycle(4);
    cycle.set_edge(0, 1, true);
    cycle.set_edge(1, 2, true);
    cycle.set_edge(2, 3, true);
    cycle.set_edge(3, 0, true);
    auto spec = structural_spec({{TermKind::Gwnsp, 0.5}});
    auto s = compute_stats(cycle, nullptr, spec);
    // the two non-edges are the diagonals, each with two shared partners
    const double expected =
        2.0 * std::exp(0.5) * (1.0 - std::pow(1.0 - std::exp(-0.5), 2.0));
    CHECK_THAT(s[1], WithinAbs(expected, 1e-12));
    CHECK_THAT(s[1], WithinAbs(testref::naive_gwnsp(cycle, 0.5), 1e-12));
}

TEST_CASE("attribute statistics on a 3-path") {
    Network p(3);
    p.set_edge(0, 1, true);
    p.set_edge(1, 2, true);
    std::vector<std::string> ids = {"0", "1", "2"};
    AttributeTable attrs(ids);
    CategoricalColumn x;
    x.levels = {"0", "1"};
    x.reference_code = 0;
    x.codes = {1, 0, 1};
    attrs.add_categorical("x", x);
    attrs.add_numeric("xn", {1.0, 0.0, 1.0});

    ModelSpec spec = structural_spec({});
    spec.terms.push_back({TermKind::NodeFactor, 0.5, "x", "1"});
    spec.terms.push_back({TermKind::NodeMatch, 0.5, "x"});
    spec.terms.push_back({TermKind::NodeCov, 0.5, "xn"});
    auto s = compute_stats(p, &attrs, spec);
    CHECK(s[1] == 2.0);
    CHECK(s[2] == 0.0);
    CHECK(s[3] == 2.0);
}

TEST_CASE("compute matches the naive reference on random graphs") {
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 5 + static_cast<int>(rng.uniform_below(14));
        auto attrs = binary_attrs(n, rng);
        auto net = random_network(n, 0.1 + 0.5 * rng.uniform(), rng);
        auto spec = full_spec();
        auto fast = compute_stats(net, &attrs, spec);
        auto naive = testref::naive_stats(net, &attrs, spec);
        REQUIRE(fast.size() == naive.size());
        for (size_t k = 0; k < fast.size(); ++k)
            CHECK_THAT(fast[k], WithinAbs(naive[k], 1e-9));
    }
}

TEST_CASE("change statistics: basic examples") {
    Network empty(3);
    auto spec = structural_spec({{TermKind::Gwesp, 0.5}});
    auto d = change_stats(empty, nullptr, spec, 0, 1);
    CHECK(d[0] == 1.0);

    // K3 minus one edge: the change of closing the triangle, checked against
    // full recomputation
    Network k3(3);
    k3.set_edge(0, 1, true);
    k3.set_edge(0, 2, true);
    k3.set_edge(1, 2, true);
    Network open = k3;
    open.toggle(0, 1);
    auto with = compute_stats(k3, nullptr, spec);
    auto without = compute_stats(open, nullptr, spec);
    auto delta = change_stats(open, nullptr, spec, 0, 1);
    for (size_t k = 0; k < delta.size(); ++k)
        CHECK_THAT(delta[k], WithinAbs(with[k] - without[k], 1e-12));

    CHECK_THROWS_AS(change_stats(empty, nullptr, spec, 1, 1), UsageError);
    CHECK_THROWS_AS(change_stats(empty, nullptr, spec, 0, 9), UsageError);
}

TEST_CASE("change statistics agree with full recomputation on random dyads") {
    Rng rng(555);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 5 + static_cast<int>(rng.uniform_below(12));
        auto attrs = binary_attrs(n, rng);
        auto net = random_network(n, 0.1 + 0.6 * rng.uniform(), rng);
        auto spec = full_spec();
        StatsEngine engine(spec, &attrs, n);

        const int i = static_cast<int>(rng.uniform_below(n));
        int j = static_cast<int>(rng.uniform_below(n - 1));
        if (j >= i) ++j;

        auto before = engine.compute(net);
        auto delta = engine.change(net, i, j);
        const double sign = net.has_edge(i, j) ? -1.0 : 1.0;
        net.toggle(i, j);
        auto after = engine.compute(net);
        for (size_t k = 0; k < delta.size(); ++k) {
            const double recomputed = after[k] - before[k];
            if (spec.terms[k].is_gw())
                CHECK_THAT(sign * delta[k], WithinAbs(recomputed, 1e-9));
            else
                CHECK(sign * delta[k] == recomputed);
        }
    }
}

TEST_CASE("gw statistics are nonnegative, zero on empty, gwnsp zero on complete") {
    Rng rng(31);
    auto spec = structural_spec(
        {{TermKind::Gwesp, 0.5}, {TermKind::Gwnsp, 0.5}, {TermKind::Gwdegree, 0.5}});
    for (int rep = 0; rep < 10; ++rep) {
        auto net = random_network(10, rng.uniform(), rng);
        auto s = compute_stats(net, nullptr, spec);
        for (size_t k = 1; k < s.size(); ++k) CHECK(s[k] >= 0.0);
    }
    Network empty(8);
    auto s0 = compute_stats(empty, nullptr, spec);
    CHECK(s0[1] == 0.0);
    CHECK(s0[2] == 0.0);
    CHECK(s0[3] == 0.0);

    Network full(6);
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) full.set_edge(i, j, true);
    auto sc = compute_stats(full, nullptr, spec);
    CHECK(sc[2] == 0.0); // no non-edges left
}

TEST_CASE("attribute statistics are bounded by edge counts") {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 12;
        auto attrs = binary_attrs(n, rng);
        auto net = random_network(n, rng.uniform(), rng);
        ModelSpec spec = structural_spec({});
        spec.terms.push_back({TermKind::NodeFactor, 0.5, "group", "1"});
        spec.terms.push_back({TermKind::NodeMatch, 0.5, "group"});
        auto s = compute_stats(net, &attrs, spec);
        CHECK(s[1] <= 2.0 * s[0]);
        CHECK(s[2] <= s[0]);
    }
}

TEST_CASE("scaled stats divide by the scale factors") {
    Rng rng(5);
    auto net = random_network(9, 0.4, rng);
    auto spec = structural_spec({{TermKind::Gwesp, 0.5}});
    spec.terms[1].scale = 7.5;
    auto raw = compute_stats(net, nullptr, spec);
    auto scaled = scaled_stats(net, nullptr, spec);
    CHECK(scaled[0] == raw[0]);
    CHECK_THAT(scaled[1], WithinAbs(raw[1] / 7.5, 1e-12));
}

TEST_CASE("missing or mistyped columns raise spec errors") {
    Network net(4);
    ModelSpec spec = structural_spec({});
    spec.terms.push_back({TermKind::NodeCov, 0.5, "weight"});
    CHECK_THROWS_AS(compute_stats(net, nullptr, spec), SpecError);

    Rng rng(1);
    auto attrs = binary_attrs(4, rng);
    ModelSpec wrong = structural_spec({});
    wrong.terms.push_back({TermKind::NodeCov, 0.5, "group"});
    CHECK_THROWS_AS(compute_stats(net, &attrs, wrong), SpecError);
}

TEST_CASE("standardize sets scales, keeps edges at 1, flags constants") {
    Rng rng(404);
    const int n = 16;
    auto net = random_network(n, 0.3, rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    AttributeTable attrs(ids);
    CategoricalColumn col;
    col.levels = {"a", "b", "c"};
    col.reference_code = 0;
    col.codes.assign(n, 1); // nobody carries level "c"
    attrs.add_categorical("grp", col);

    ModelSpec spec = structural_spec({{TermKind::Gwesp, 0.5}});
    spec.terms.push_back({TermKind::NodeFactor, 0.5, "grp", "c"});

    auto res = standardize(spec, net, &attrs, 200, 9);
    CHECK(res.spec.terms[0].scale == 1.0);
    CHECK(res.spec.terms[1].scale > 0.0);
    CHECK(res.spec.terms[1].scale == res.stat_sd[1]);
    CHECK(res.spec.terms[2].excluded);
    REQUIRE(res.excluded.size() == 1);
    CHECK(res.excluded[0] == "nodefactor.grp.c");

    auto res2 = standardize(spec, net, &attrs, 200, 9);
    CHECK(res2.spec.terms[1].scale == res.spec.terms[1].scale);

    CHECK_THROWS_AS(standardize(spec, net, &attrs, 1, 9), UsageError);
}

TEST_CASE("nodematch over a single shared level reduces to the edge count") {
    Rng rng(61);
    const int n = 15;
    auto net = random_network(n, 0.3, rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    AttributeTable attrs(ids);
    CategoricalColumn col;
    col.levels = {"only"};
    col.reference_code = 0;
    col.codes.assign(n, 0);
    attrs.add_categorical("grp", col);

    ModelSpec spec = structural_spec({});
    spec.terms.push_back({TermKind::NodeMatch, 0.5, "grp"});
    auto s = compute_stats(net, &attrs, spec);
    CHECK(s[1] == s[0]);

    auto res = standardize(spec, net, &attrs, 400, 3);
    CHECK(res.stat_sd[1] == res.stat_sd[0]);
}

TEST_CASE("standardize SD of the edges statistic matches the binomial form") {
    Rng rng(8);
    const int n = 20;
    auto net = random_network(n, 0.25, rng);
    ModelSpec spec = structural_spec({{TermKind::Gwesp, 0.5}});
    auto res = standardize(spec, net, nullptr, 800, 21);
    const double d = static_cast<double>(dyad_count(n));
    const double p = net.edge_count() / d;
    const double expected = std::sqrt(d * p * (1.0 - p));
    CHECK_THAT(res.stat_sd[0] / expected, WithinAbs(1.0, 0.2));
}
