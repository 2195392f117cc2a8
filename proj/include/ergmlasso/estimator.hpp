#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "ergmlasso/oracle.hpp"
#include "ergmlasso/sampler.hpp"
#include "ergmlasso/stats.hpp"
#include "ergmlasso/textio.hpp"

namespace ergmlasso {

struct SgdConfig {
    double eta0 = 0.0;   // <= 0: auto, 0.25 / max sampled-statistic SD at theta0
    int max_iters = 2000;
    int m_per_iter = 100;
    int window = 25;     // convergence window and tail-averaging span
    double tol = 0.01;   // window mean of |theta_{t+1} - theta_t|_inf
    std::uint64_t seed = 1729;
    int n_chains = 1;
    double divergence_bound = 50.0; // |theta|_inf in scaled units
    long burn_in = -1;   // first-iteration burn; -1 -> 20 * dyads
    long thin = -1;      // between retained draws; -1 -> dyads
    double snap_tol = 1e-6; // tail averages below this snap to exact zero
    int workers = 1;     // threads for multi-chain sampling; results do not depend on it

    long burn_for(long dyads) const { return burn_in >= 0 ? burn_in : 20 * dyads; }
    long thin_for(long dyads) const { return thin >= 0 ? thin : dyads; }
};

struct FitTrace {
    std::vector<std::vector<double>> theta; // post-update iterates
    std::vector<double> eta;
    std::vector<double> delta_norm; // |Delta_t|_inf
    std::vector<double> acceptance;

    void write_csv(std::ostream& out, const std::vector<std::string>& labels) const {
        CsvWriter csv(out);
        std::vector<std::string> head = {"iteration", "eta"};
        for (auto& l : labels) head.push_back(l);
        head.push_back("delta_inf");
        csv.row(head);
        for (size_t t = 0; t < theta.size(); ++t) {
            std::vector<std::string> row = {std::to_string(t), format_double(eta[t])};
            for (double v : theta[t]) row.push_back(format_double(v));
            row.push_back(format_double(delta_norm[t]));
            csv.row(row);
        }
    }
};

struct FitResult {
    std::vector<double> theta;
    bool converged = false;
    int iterations = 0;
    FitTrace trace;
};

// Supplies Delta_t = s(y_obs) - mean of sampled statistics at theta, in
// scaled units. The MCMC source is the production path; the exact source
// substitutes oracle moments so estimator logic can be tested free of
// sampler noise.
class GradientSource {
public:
    virtual ~GradientSource() = default;
    virtual std::vector<double> delta(std::span<const double> theta) = 0;
    // SD of the statistics in the sample behind the last delta() call.
    virtual const std::vector<double>& last_stat_sd() const = 0;
    virtual double last_acceptance() const {
        return std::numeric_limits<double>::quiet_NaN();
    }
};

class McmcGradientSource final : public GradientSource {
public:
    McmcGradientSource(const StatsEngine& engine, const Network& observed,
                       std::vector<double> observed_scaled, const SgdConfig& cfg)
        : observed_(std::move(observed_scaled)), cfg_(cfg) {
        const int c = std::max(1, cfg.n_chains);
        for (int k = 0; k < c; ++k) {
            chains_.emplace_back(engine, observed, derive_seed(cfg.seed, k));
            draws_.push_back(cfg.m_per_iter / c + (k < cfg.m_per_iter % c ? 1 : 0));
        }
        sd_.resize(engine.dim(), 0.0);
    }

    std::vector<double> delta(std::span<const double> theta) override {
        const int p1 = static_cast<int>(observed_.size());
        std::vector<std::vector<std::vector<double>>> buf(chains_.size());
        auto run_chain = [&](size_t c) {
            MhChain& chain = chains_[c];
            const long dyads = chain.dyads();
            chain.set_theta(theta);
            chain.reset_counters();
            chain.advance(first_ ? cfg_.burn_for(dyads) : dyads);
            const long thin = cfg_.thin_for(dyads);
            buf[c].reserve(draws_[c]);
            for (int d = 0; d < draws_[c]; ++d) {
                chain.advance(thin);
                buf[c].push_back(chain.stats());
            }
        };
        if (chains_.size() > 1 && cfg_.workers > 1) {
            std::vector<std::future<void>> jobs;
            for (size_t c = 1; c < chains_.size(); ++c)
                jobs.push_back(std::async(std::launch::async, run_chain, c));
            run_chain(0);
            for (auto& j : jobs) j.get();
        } else {
            for (size_t c = 0; c < chains_.size(); ++c) run_chain(c);
        }
        first_ = false;

        // Merge in (chain, draw) order; independent of scheduling.
        std::vector<double> mean(p1, 0.0), m2(p1, 0.0);
        long total = 0, attempts = 0, accepts = 0;
        for (size_t c = 0; c < chains_.size(); ++c) {
            for (const auto& s : buf[c]) {
                ++total;
                for (int k = 0; k < p1; ++k) {
                    const double dlt = s[k] - mean[k];
                    mean[k] += dlt / total;
                    m2[k] += dlt * (s[k] - mean[k]);
                }
            }
            attempts += chains_[c].attempts();
            accepts += chains_[c].accepts();
        }
        acceptance_ = attempts ? static_cast<double>(accepts) / attempts : 0.0;
        std::vector<double> out(p1);
        for (int k = 0; k < p1; ++k) {
            sd_[k] = total > 1 ? std::sqrt(m2[k] / (total - 1)) : 0.0;
            out[k] = observed_[k] - mean[k];
        }
        return out;
    }

    const std::vector<double>& last_stat_sd() const override { return sd_; }
    double last_acceptance() const override { return acceptance_; }

private:
    std::vector<double> observed_;
    SgdConfig cfg_;
    std::vector<MhChain> chains_;
    std::vector<int> draws_;
    std::vector<double> sd_;
    bool first_ = true;
    double acceptance_ = 0.0;
};

class ExactGradientSource final : public GradientSource {
public:
    ExactGradientSource(const ExactModel& model, std::vector<double> observed_scaled)
        : model_(&model), observed_(std::move(observed_scaled)) {
        sd_.resize(observed_.size(), 0.0);
    }

    std::vector<double> delta(std::span<const double> theta) override {
        auto mom = model_->exact_moments(theta);
        std::vector<double> out(observed_.size());
        for (size_t k = 0; k < out.size(); ++k) {
            out[k] = observed_[k] - mom.mean[k];
            sd_[k] = std::sqrt(std::max(0.0, mom.cov(k, k)));
        }
        return out;
    }

    const std::vector<double>& last_stat_sd() const override { return sd_; }

private:
    const ExactModel* model_;
    std::vector<double> observed_;
    std::vector<double> sd_;
};

inline double corrected_logit_density(const Network& net) {
    const double dyads = static_cast<double>(net.dyads());
    const double p = (net.edge_count() + 0.5) / (dyads + 1.0);
    return std::log(p / (1.0 - p));
}

inline std::vector<double> default_theta0(const ModelSpec& spec, const Network& observed) {
    std::vector<double> theta(spec.dim(), 0.0);
    theta[0] = corrected_logit_density(observed);
    return theta;
}

namespace detail {

// Shared SGD driver. With use_penalty the update is the truncated
// subgradient rule: a coordinate whose step would cross zero is clipped to
// exactly zero, and a coordinate at zero moves only when |Delta_j| exceeds
// lambda, with the excess as its effective gradient. This keeps zeros exact,
// which the importance score relies on.
inline FitResult run_sgd(const ModelSpec& spec, GradientSource& src,
                         const SgdConfig& cfg, bool use_penalty, double lambda,
                         std::vector<double> theta) {
    const int p1 = spec.dim();
    if (static_cast<int>(theta.size()) != p1)
        throw UsageError("theta0 length does not match spec");
    if (lambda < 0.0) throw UsageError("lambda must be nonnegative");
    if (cfg.tol <= 0.0 || cfg.window < 1 || cfg.m_per_iter < 1 || cfg.max_iters < 1)
        throw UsageError("bad SGD configuration: tol, window, m, max_iters must be positive");
    for (int j = 0; j < p1; ++j)
        if (spec.terms[j].excluded) theta[j] = 0.0;

    FitResult res;
    double eta0 = cfg.eta0;
    std::deque<double> moves;
    int t = 0;
    for (; t < cfg.max_iters; ++t) {
        auto d = src.delta(theta);
        if (eta0 <= 0.0) {
            double max_sd = 0.0;
            for (double s : src.last_stat_sd()) max_sd = std::max(max_sd, s);
            eta0 = max_sd > 0.0 ? 0.25 / max_sd : 0.25;
        }
        const double eta = eta0 / std::sqrt(static_cast<double>(t) + 1.0);
        double dnorm = 0.0;
        for (double v : d) dnorm = std::max(dnorm, std::abs(v));

        double move = 0.0;
        for (int j = 0; j < p1; ++j) {
            const StatTerm& term = spec.terms[j];
            if (term.excluded) continue;
            const double old = theta[j];
            const double g = d[j];
            double next;
            if (!use_penalty || !term.penalized || lambda == 0.0) {
                next = old + eta * g;
            } else if (old != 0.0) {
                const double sgn = old > 0.0 ? 1.0 : -1.0;
                next = old + eta * (g - lambda * sgn);
                if ((old > 0.0 && next < 0.0) || (old < 0.0 && next > 0.0))
                    next = 0.0;
            } else {
                next = std::abs(g) <= lambda
                           ? 0.0
                           : eta * (g > 0 ? 1.0 : -1.0) * (std::abs(g) - lambda);
            }
            theta[j] = next;
            move = std::max(move, std::abs(next - old));
        }

        res.trace.theta.push_back(theta);
        res.trace.eta.push_back(eta);
        res.trace.delta_norm.push_back(dnorm);
        res.trace.acceptance.push_back(src.last_acceptance());

        double tnorm = 0.0;
        for (double v : theta) tnorm = std::max(tnorm, std::abs(v));
        if (!std::isfinite(tnorm) || tnorm > cfg.divergence_bound)
            throw DegeneracyError("theta diverged beyond " +
                                  format_double(cfg.divergence_bound) +
                                  " in scaled units; model is likely near-degenerate");

        moves.push_back(move);
        if (static_cast<int>(moves.size()) > cfg.window) moves.pop_front();
        if (static_cast<int>(moves.size()) == cfg.window) {
            double avg = 0.0;
            for (double mv : moves) avg += mv;
            if (avg / cfg.window < cfg.tol) {
                res.converged = true;
                ++t;
                break;
            }
        }
    }

    res.iterations = t;
    // Polyak-style tail average over the last window iterates.
    const int have = static_cast<int>(res.trace.theta.size());
    const int span = std::min(cfg.window, have);
    res.theta.assign(p1, 0.0);
    for (int k = have - span; k < have; ++k)
        for (int j = 0; j < p1; ++j) res.theta[j] += res.trace.theta[k][j];
    for (int j = 0; j < p1; ++j) res.theta[j] /= span;
    for (int j = 0; j < p1; ++j) {
        if (spec.terms[j].excluded) {
            res.theta[j] = 0.0;
        } else if (use_penalty && spec.terms[j].penalized &&
                   std::abs(res.theta[j]) < cfg.snap_tol) {
            res.theta[j] = 0.0;
        }
    }
    return res;
}

} // namespace detail

inline FitResult fit_mle_with(const ModelSpec& spec, GradientSource& src,
                              const SgdConfig& cfg, std::vector<double> theta0) {
    return detail::run_sgd(spec, src, cfg, false, 0.0, std::move(theta0));
}

inline FitResult fit_lasso_with(const ModelSpec& spec, GradientSource& src,
                                double lambda, const SgdConfig& cfg,
                                std::vector<double> theta0) {
    return detail::run_sgd(spec, src, cfg, true, lambda, std::move(theta0));
}

inline FitResult fit_mle(const Network& observed, const AttributeTable* attrs,
                         const ModelSpec& spec, const SgdConfig& cfg) {
    StatsEngine engine(spec, attrs, observed.n_nodes());
    auto obs = engine.compute(observed);
    scale_stats(spec, obs);
    McmcGradientSource src(engine, observed, obs, cfg);
    return fit_mle_with(spec, src, cfg, default_theta0(spec, observed));
}

inline FitResult fit_lasso(const Network& observed, const AttributeTable* attrs,
                           const ModelSpec& spec, double lambda, const SgdConfig& cfg,
                           std::vector<double> theta0 = {}) {
    StatsEngine engine(spec, attrs, observed.n_nodes());
    auto obs = engine.compute(observed);
    scale_stats(spec, obs);
    McmcGradientSource src(engine, observed, obs, cfg);
    if (theta0.empty()) theta0 = default_theta0(spec, observed);
    return fit_lasso_with(spec, src, lambda, cfg, std::move(theta0));
}

} // namespace ergmlasso
