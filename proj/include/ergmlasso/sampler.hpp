#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ergmlasso/graph.hpp"
#include "ergmlasso/rng.hpp"
#include "ergmlasso/stats.hpp"

namespace ergmlasso {

struct SamplerConfig {
    enum class Init { observed, empty, er_density };

    long burn_in = -1;  // toggle attempts; -1 -> 20 * dyads
    long thin = -1;     // attempts between retained draws; -1 -> dyads
    int m = 100;        // retained draws
    std::uint64_t seed = 1729;
    Init init = Init::observed;
    double er_density = 0.0; // used with Init::er_density

    long burn_for(long dyads) const { return burn_in >= 0 ? burn_in : 20 * dyads; }
    long thin_for(long dyads) const { return thin >= 0 ? thin : dyads; }
};

// Metropolis-Hastings tie-toggle chain. Proposes a uniformly random dyad and
// accepts with min(1, exp(theta . scaled change)). The scaled statistic
// vector is maintained incrementally; it is never recomputed inside the
// chain.
class MhChain {
public:
    MhChain(const StatsEngine& engine, const Network& start, std::uint64_t seed)
        : engine_(&engine),
          net_(start),
          rng_(seed),
          theta_(engine.dim(), 0.0),
          stats_(engine.dim()),
          delta_(engine.dim()) {
        if (start.n_nodes() < 2)
            throw UsageError("a chain needs at least 2 nodes");
        if (start.n_nodes() != engine.n_nodes())
            throw UsageError("network size does not match the statistics engine");
        const auto& spec = engine.spec();
        inv_scale_.reserve(spec.terms.size());
        for (const auto& t : spec.terms) inv_scale_.push_back(1.0 / t.scale);
        engine_->compute(net_, stats_.data());
        for (size_t k = 0; k < stats_.size(); ++k) stats_[k] *= inv_scale_[k];
        const int n = net_.n_nodes();
        dyad_i_.reserve(dyad_count(n));
        dyad_j_.reserve(dyad_count(n));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                dyad_i_.push_back(i);
                dyad_j_.push_back(j);
            }
    }

    void set_theta(std::span<const double> theta) {
        theta_.assign(theta.begin(), theta.end());
    }

    void advance(long attempts) {
        const long dyads = static_cast<long>(dyad_i_.size());
        for (long a = 0; a < attempts; ++a) {
            const long k = static_cast<long>(rng_.uniform_below(dyads));
            const int i = dyad_i_[k];
            const int j = dyad_j_[k];
            engine_->change(net_, i, j, delta_.data());
            const bool adding = !net_.has_edge(i, j);
            const double sign = adding ? 1.0 : -1.0;
            double logratio = 0.0;
            for (size_t t = 0; t < theta_.size(); ++t)
                logratio += theta_[t] * sign * delta_[t] * inv_scale_[t];
            if (!std::isfinite(logratio))
                throw NumericalError("non-finite acceptance exponent at dyad (" +
                                     std::to_string(i) + "," + std::to_string(j) +
                                     "); theta overflow");
            ++attempts_;
            if (logratio >= 0.0 || rng_.uniform() < std::exp(logratio)) {
                net_.toggle(i, j);
                for (size_t t = 0; t < stats_.size(); ++t)
                    stats_[t] += sign * delta_[t] * inv_scale_[t];
                ++accepts_;
            }
        }
    }

    const std::vector<double>& stats() const { return stats_; }
    const Network& network() const { return net_; }
    long dyads() const { return static_cast<long>(dyad_i_.size()); }

    double acceptance_rate() const {
        return attempts_ ? static_cast<double>(accepts_) / attempts_ : 0.0;
    }
    long attempts() const { return attempts_; }
    long accepts() const { return accepts_; }
    void reset_counters() { attempts_ = accepts_ = 0; }

private:
    const StatsEngine* engine_;
    Network net_;
    Rng rng_;
    std::vector<double> theta_;
    std::vector<double> stats_; // scaled, incrementally maintained
    std::vector<double> delta_;
    std::vector<double> inv_scale_;
    std::vector<int> dyad_i_, dyad_j_;
    long attempts_ = 0, accepts_ = 0;
};

inline Network make_er_network(int n, double p, Rng& rng) {
    Network net(n);
    if (p <= 0.0) return net;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (p >= 1.0 || rng.bernoulli(p)) net.set_edge(i, j, true);
    return net;
}

// m i.i.d. Erdos-Renyi draws. Each draw uses its own seed derived from the
// master seed, so a parallel implementation would produce the same sample.
inline std::vector<Network> sample_er(int n, double p, int m, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw UsageError("tie probability must be in [0,1]");
    std::vector<Network> out;
    out.reserve(m);
    for (int d = 0; d < m; ++d) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
        out.push_back(make_er_network(n, p, rng));
    }
    return out;
}

inline Network initial_network(const SamplerConfig& cfg, const Network& observed,
                               std::uint64_t seed) {
    switch (cfg.init) {
        case SamplerConfig::Init::observed: return observed;
        case SamplerConfig::Init::empty: return Network(observed.n_nodes());
        case SamplerConfig::Init::er_density: {
            Rng rng(derive_seed(seed, 0x45520000ULL));
            return make_er_network(observed.n_nodes(), cfg.er_density, rng);
        }
    }
    return observed;
}

struct SampleResult {
    std::vector<std::vector<double>> stats; // scaled, one per retained draw
    std::vector<Network> networks;          // filled only when requested
};

// Draws cfg.m networks from the model at theta. Statistics are in scaled
// units when the spec carries scale factors.
inline SampleResult sample(const ModelSpec& spec, std::span<const double> theta,
                           const Network& net0, const AttributeTable* attrs,
                           const SamplerConfig& cfg, bool keep_networks = false) {
    if (static_cast<int>(theta.size()) != spec.dim())
        throw UsageError("theta length does not match spec");
    if (cfg.m < 1) throw UsageError("sample size must be at least 1");
    if (cfg.thin == 0) throw UsageError("thin must be at least 1");
    StatsEngine engine(spec, attrs, net0.n_nodes());
    MhChain chain(engine, initial_network(cfg, net0, cfg.seed), cfg.seed);
    chain.set_theta(theta);
    const long dyads = chain.dyads();
    chain.advance(cfg.burn_for(dyads));
    SampleResult out;
    out.stats.reserve(cfg.m);
    for (int d = 0; d < cfg.m; ++d) {
        chain.advance(cfg.thin_for(dyads));
        out.stats.push_back(chain.stats());
        if (keep_networks) out.networks.push_back(chain.network());
    }
    return out;
}

} // namespace ergmlasso
