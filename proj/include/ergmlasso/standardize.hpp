#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ergmlasso/sampler.hpp"
#include "ergmlasso/stats.hpp"

namespace ergmlasso {

struct StandardizeResult {
    ModelSpec spec;                      // scale factors filled in
    std::vector<std::string> excluded;   // labels of zero-SD terms
    std::vector<double> stat_sd;         // per-term sample SD under the reference model
};

// Sets each non-edges scale factor to the sample SD of its statistic over m
// Erdos-Renyi draws at the observed density (M-1 denominator). The edges
// term is the intercept and is left at scale 1. A term whose statistic is
// constant over the reference sample carries no selection information; it is
// flagged excluded and pinned to zero downstream.
inline StandardizeResult standardize(const ModelSpec& spec, const Network& observed,
                                     const AttributeTable* attrs, int m,
                                     std::uint64_t seed) {
    if (m < 2) throw UsageError("standardize needs a sample of at least 2");
    const int n = observed.n_nodes();
    const long dyads = observed.dyads();
    const double density = dyads > 0 ? static_cast<double>(observed.edge_count()) / dyads : 0.0;

    StatsEngine engine(spec, attrs, n);
    const int p1 = engine.dim();
    std::vector<double> mean(p1, 0.0), m2(p1, 0.0), s(p1);
    for (int d = 0; d < m; ++d) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
        Network net = make_er_network(n, density, rng);
        engine.compute(net, s.data());
        // Welford update
        for (int k = 0; k < p1; ++k) {
            const double delta = s[k] - mean[k];
            mean[k] += delta / (d + 1);
            m2[k] += delta * (s[k] - mean[k]);
        }
    }

    StandardizeResult out;
    out.spec = spec;
    out.stat_sd.resize(p1);
    for (int k = 0; k < p1; ++k) {
        out.stat_sd[k] = std::sqrt(m2[k] / (m - 1));
        if (k == 0) continue; // edges stays at scale 1
        StatTerm& t = out.spec.terms[k];
        if (out.stat_sd[k] > 0.0) {
            t.scale = out.stat_sd[k];
        } else {
            t.scale = 1.0;
            t.excluded = true;
            t.penalized = false;
            out.excluded.push_back(term_label(t));
        }
    }
    return out;
}

} // namespace ergmlasso
