#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ergmlasso/estimator.hpp"
#include "ergmlasso/sampler.hpp"
#include "ergmlasso/standardize.hpp"

namespace ergmlasso {

struct LambdaGrid {
    std::vector<double> values; // strictly decreasing, last >= 0

    void validate() const {
        if (values.empty()) throw UsageError("empty lambda grid");
        for (size_t g = 0; g + 1 < values.size(); ++g)
            if (!(values[g] > values[g + 1]))
                throw UsageError("lambda grid must be strictly decreasing");
        if (values.back() < 0.0) throw UsageError("lambda must be nonnegative");
    }

    static LambdaGrid geometric(double top, double bottom, int count,
                                bool append_zero = false) {
        if (!(top > bottom) || !(bottom > 0.0) || count < 2)
            throw UsageError("bad geometric grid parameters");
        LambdaGrid g;
        const double ratio = std::pow(bottom / top, 1.0 / (count - 1));
        double v = top;
        for (int k = 0; k < count; ++k, v *= ratio) g.values.push_back(v);
        g.values.back() = bottom;
        if (append_zero) g.values.push_back(0.0);
        return g;
    }

    static LambdaGrid linear(double top, double bottom, int count) {
        if (!(top > bottom) || bottom < 0.0 || count < 2)
            throw UsageError("bad linear grid parameters");
        LambdaGrid g;
        for (int k = 0; k < count; ++k)
            g.values.push_back(top + (bottom - top) * k / (count - 1));
        return g;
    }
};

struct PathResult {
    LambdaGrid grid;
    std::vector<std::string> labels;
    std::vector<double> scales;
    std::vector<bool> penalized;
    std::vector<std::vector<double>> coef; // grid point x term, scaled units
    std::vector<bool> converged;           // per grid point
    std::vector<bool> jump_flag;           // warm-start discontinuity markers
    // Importance score R_i = largest grid lambda with a nonzero coefficient;
    // NaN for never-selected terms and for the unpenalized edges term.
    std::vector<double> importance;
    std::vector<int> first_sign;
    std::uint64_t seed = 0;
    bool all_converged = true;

    bool never_selected(int term) const { return std::isnan(importance[term]); }
};

// Smallest penalty at which every penalized coordinate stays at zero, found
// by doubling/halving probe fits from a subgradient-informed start.
inline double find_lambda_max(const ModelSpec& spec, GradientSource& src,
                              const SgdConfig& cfg, std::vector<double> theta0) {
    auto all_zero = [&](double lam) {
        auto fit = fit_lasso_with(spec, src, lam, cfg, theta0);
        for (int j = 1; j < spec.dim(); ++j)
            if (spec.terms[j].penalized && !spec.terms[j].excluded &&
                fit.theta[j] != 0.0)
                return false;
        return true;
    };
    auto d0 = src.delta(theta0);
    double lam = 0.0;
    for (int j = 1; j < spec.dim(); ++j)
        if (spec.terms[j].penalized && !spec.terms[j].excluded)
            lam = std::max(lam, std::abs(d0[j]));
    if (lam <= 0.0) lam = 1.0;
    if (all_zero(lam)) {
        for (int it = 0; it < 60 && lam > 1e-8; ++it) {
            if (!all_zero(lam / 2)) break;
            lam /= 2;
        }
        return lam;
    }
    for (int it = 0; it < 60; ++it) {
        lam *= 2;
        if (all_zero(lam)) return lam;
    }
    throw NumericalError("doubling search for lambda_max failed to shrink all terms");
}

// Default grid: `points` geometric values from lambda_max down to
// lambda_max/span, plus lambda = 0.
inline LambdaGrid default_grid(double lambda_max, int points = 40, double span = 100.0) {
    return LambdaGrid::geometric(lambda_max, lambda_max / span, points, true);
}

inline PathResult compute_path_with(const ModelSpec& spec, GradientSource& src,
                                    const LambdaGrid& grid, const SgdConfig& cfg,
                                    std::vector<double> theta0,
                                    double jump_threshold = 5.0) {
    grid.validate();
    const int p1 = spec.dim();
    PathResult out;
    out.grid = grid;
    out.labels = spec.labels();
    out.scales = spec.scales();
    out.penalized.resize(p1);
    for (int j = 0; j < p1; ++j)
        out.penalized[j] = spec.terms[j].penalized && !spec.terms[j].excluded;
    out.seed = cfg.seed;

    std::vector<double> theta = std::move(theta0);
    for (size_t g = 0; g < grid.values.size(); ++g) {
        const double lam = grid.values[g];
        FitResult fit = fit_lasso_with(spec, src, lam, cfg, theta);
        out.converged.push_back(fit.converged);
        out.all_converged = out.all_converged && fit.converged;
        bool jump = false;
        if (g > 0) {
            double move = 0.0;
            for (int j = 0; j < p1; ++j)
                move = std::max(move, std::abs(fit.theta[j] - out.coef.back()[j]));
            jump = move > jump_threshold;
        }
        out.jump_flag.push_back(jump);
        out.coef.push_back(fit.theta);
        theta = fit.theta; // warm start for the next grid point
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.importance.assign(p1, nan);
    out.first_sign.assign(p1, 0);
    for (int j = 1; j < p1; ++j) {
        if (!out.penalized[j]) continue;
        for (size_t g = 0; g < grid.values.size(); ++g) {
            if (!out.converged[g]) continue; // scored over converged points only
            if (out.coef[g][j] != 0.0) {
                out.importance[j] = grid.values[g];
                out.first_sign[j] = out.coef[g][j] > 0 ? 1 : -1;
                break;
            }
        }
    }
    return out;
}

inline PathResult compute_path(const Network& observed, const AttributeTable* attrs,
                               const ModelSpec& spec, const LambdaGrid& grid,
                               const SgdConfig& cfg) {
    StatsEngine engine(spec, attrs, observed.n_nodes());
    auto obs = engine.compute(observed);
    scale_stats(spec, obs);
    McmcGradientSource src(engine, observed, obs, cfg);
    return compute_path_with(spec, src, grid, cfg, default_theta0(spec, observed));
}

// Terms ordered by importance, descending. Ties break on the larger
// |coefficient| at the largest grid point where both are nonzero, then on
// spec order, so reports are reproducible. The edges term is not ranked.
inline std::vector<int> rank(const PathResult& path) {
    const int p1 = static_cast<int>(path.labels.size());
    std::vector<int> terms;
    for (int j = 1; j < p1; ++j)
        if (path.penalized[j]) terms.push_back(j);

    auto coef_tiebreak = [&](int a, int b) {
        for (size_t g = 0; g < path.grid.values.size(); ++g) {
            const double ca = path.coef[g][a];
            const double cb = path.coef[g][b];
            if (ca != 0.0 && cb != 0.0) {
                if (std::abs(ca) != std::abs(cb)) return std::abs(ca) > std::abs(cb) ? -1 : 1;
                return 0;
            }
        }
        return 0;
    };
    std::stable_sort(terms.begin(), terms.end(), [&](int a, int b) {
        const bool na = path.never_selected(a), nb = path.never_selected(b);
        if (na != nb) return nb;       // selected terms ahead of never-selected
        if (na && nb) return false;    // spec order (stable)
        if (path.importance[a] != path.importance[b])
            return path.importance[a] > path.importance[b];
        const int t = coef_tiebreak(a, b);
        if (t != 0) return t < 0;
        return false; // spec order (stable)
    });
    return terms;
}

// ---------------------------------------------------------------------------
// Inference on an unpenalized refit.
// ---------------------------------------------------------------------------

struct InferenceConfig {
    int cov_sample = 4000;   // draws behind the covariance / SE estimate
    int bridge_points = 20;  // path-sampling intervals for log kappa
    int bridge_sample = 1000; // draws per bridge node

    // Monte-Carlo Newton refit: moment matching with sampled covariance
    // steps, the sample growing geometrically so late steps are quiet.
    int newton_iters = 80;
    int newton_m0 = 200;
    int newton_m_max = 4000;
    double moment_rtol = 0.05; // residual tolerance as a fraction of each stat SD
    double max_step = 2.0;     // per-iteration |step|_inf cap, scaled units
};

struct FitReport {
    std::vector<std::string> labels;
    std::vector<double> scales;
    std::vector<double> coef_scaled, coef_raw;
    std::vector<double> se_scaled, se_raw;
    std::vector<double> p_value;
    double loglik = 0.0;
    double aic = 0.0;
    int n_params = 0;
    bool converged = false;
    std::vector<std::string> excluded;
};

// log likelihood s(y_obs).theta - log kappa(theta) with log kappa estimated
// by path sampling from the dyad-independent anchor theta0 =
// (logit(density), 0, ..., 0), whose normalizing constant is closed-form:
//   log kappa(theta0) = D log(1 + exp(theta0_edges)).
// The integrand E_{theta(u)}[s].(theta - theta0) is estimated by MCMC on a
// trapezoid grid over u in [0, 1], with one warm chain walked along the path.
inline double estimate_loglik(const Network& observed, const AttributeTable* attrs,
                              const ModelSpec& spec, std::span<const double> theta,
                              const InferenceConfig& inf, std::uint64_t seed) {
    const int p1 = spec.dim();
    if (static_cast<int>(theta.size()) != p1)
        throw UsageError("theta length does not match spec");
    StatsEngine engine(spec, attrs, observed.n_nodes());
    auto obs = engine.compute(observed);
    scale_stats(spec, obs);

    std::vector<double> anchor(p1, 0.0);
    anchor[0] = corrected_logit_density(observed);
    const double dyads = static_cast<double>(observed.dyads());
    const double log_kappa0 = dyads * std::log1p(std::exp(anchor[0]));

    double dot_obs = 0.0, seg = 0.0;
    std::vector<double> diff(p1);
    for (int k = 0; k < p1; ++k) {
        dot_obs += obs[k] * theta[k];
        diff[k] = theta[k] - anchor[k];
        seg = std::max(seg, std::abs(diff[k]));
    }
    if (seg == 0.0) return dot_obs - log_kappa0;

    const int U = inf.bridge_points;
    MhChain chain(engine, observed, derive_seed(seed, 0xB5D6EULL));
    const long d = chain.dyads();
    double integral = 0.0;
    std::vector<double> point(p1);
    for (int k = 0; k <= U; ++k) {
        const double u = static_cast<double>(k) / U;
        for (int j = 0; j < p1; ++j) point[j] = anchor[j] + u * diff[j];
        chain.set_theta(point);
        try {
            chain.advance(k == 0 ? 20 * d : d);
            double mean_dot = 0.0;
            for (int s = 0; s < inf.bridge_sample; ++s) {
                chain.advance(d);
                const auto& st = chain.stats();
                double acc = 0.0;
                for (int j = 0; j < p1; ++j) acc += st[j] * diff[j];
                mean_dot += (acc - mean_dot) / (s + 1);
            }
            const double weight = (k == 0 || k == U) ? 0.5 / U : 1.0 / U;
            integral += weight * mean_dot;
        } catch (const NumericalError& e) {
            throw NumericalError("path sampling failed at u=" + format_double(u) +
                                 ": " + e.what());
        }
    }
    return dot_obs - (log_kappa0 + integral);
}

namespace detail {

// Monte-Carlo Newton-Raphson moment matching:
//   theta <- theta - damp * Cov^-1 (E_hat[s] - s_obs)
// with sampled moments from a warm chain. The subgradient path estimator
// stalls on the flat stretches of the moment map that triadic models
// develop; the covariance step walks through them.
struct NewtonFit {
    std::vector<double> theta;
    bool converged = false;
    FitTrace trace;
};

inline NewtonFit newton_refit(const StatsEngine& engine, const Network& observed,
                              std::span<const double> obs_scaled,
                              const ModelSpec& spec, const SgdConfig& cfg,
                              const InferenceConfig& inf) {
    const int p1 = spec.dim();
    std::vector<int> active;
    for (int j = 0; j < p1; ++j)
        if (!spec.terms[j].excluded) active.push_back(j);
    const int pa = static_cast<int>(active.size());

    NewtonFit res;
    res.theta = default_theta0(spec, observed);
    for (int j = 0; j < p1; ++j)
        if (spec.terms[j].excluded) res.theta[j] = 0.0;

    MhChain chain(engine, observed, derive_seed(cfg.seed, 0x4E57ULL));
    const long dyads = chain.dyads();
    chain.set_theta(res.theta);
    chain.advance(cfg.burn_for(dyads));
    const long thin = cfg.thin_for(dyads);

    // do not declare victory before the sample is large enough to see the
    // residual tolerance above its own noise
    const int m_gate =
        std::min(inf.newton_m_max,
                 static_cast<int>(4.0 / (inf.moment_rtol * inf.moment_rtol)));
    double m = inf.newton_m0;
    std::vector<std::vector<double>> buf;
    for (int it = 0; it < inf.newton_iters; ++it) {
        const int draws = static_cast<int>(m);
        chain.set_theta(res.theta);
        chain.advance(dyads);
        buf.clear();
        buf.reserve(draws);
        for (int d = 0; d < draws; ++d) {
            chain.advance(thin);
            buf.push_back(chain.stats());
        }
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(pa);
        for (const auto& s : buf)
            for (int a = 0; a < pa; ++a) mean[a] += s[active[a]];
        mean /= static_cast<double>(draws);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(pa, pa);
        for (const auto& s : buf) {
            Eigen::VectorXd c(pa);
            for (int a = 0; a < pa; ++a) c[a] = s[active[a]] - mean[a];
            cov += c * c.transpose();
        }
        cov /= static_cast<double>(draws - 1);

        Eigen::VectorXd resid(pa);
        double resid_inf = 0.0;
        bool within = true;
        for (int a = 0; a < pa; ++a) {
            resid[a] = mean[a] - obs_scaled[active[a]];
            resid_inf = std::max(resid_inf, std::abs(resid[a]));
            const double sd = std::sqrt(std::max(cov(a, a), 0.0));
            if (std::abs(resid[a]) > std::max(inf.moment_rtol * sd, 1e-9))
                within = false;
        }
        res.trace.theta.push_back(res.theta);
        res.trace.eta.push_back(static_cast<double>(draws));
        res.trace.delta_norm.push_back(resid_inf);
        res.trace.acceptance.push_back(chain.acceptance_rate());
        if (within && draws >= m_gate) {
            res.converged = true;
            break;
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
        Eigen::VectorXd step = ldlt.solve(resid);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            std::string offenders;
            for (int a = 0; a < pa; ++a)
                offenders += (offenders.empty() ? "" : ", ") +
                             term_label(spec.terms[active[a]]);
            throw CollinearityError(
                "singular statistic covariance during the refit; terms: " + offenders);
        }
        const double step_inf = step.cwiseAbs().maxCoeff();
        const double damp = step_inf > inf.max_step ? inf.max_step / step_inf : 1.0;
        double theta_inf = 0.0;
        for (int a = 0; a < pa; ++a) {
            res.theta[active[a]] -= damp * step[a];
            theta_inf = std::max(theta_inf, std::abs(res.theta[active[a]]));
        }
        if (!std::isfinite(theta_inf) || theta_inf > cfg.divergence_bound * 2)
            throw DegeneracyError("refit diverged; model is likely near-degenerate");
        m = std::min<double>(m * 1.4, inf.newton_m_max);
    }
    return res;
}

} // namespace detail

// Unpenalized refit plus Wald inference: the Fisher information of an
// exponential family is the statistic covariance, so SE_j is the square root
// of the j-th diagonal of the inverse sampled covariance at theta-hat.
inline FitReport refit_inference(const Network& observed, const AttributeTable* attrs,
                                 const ModelSpec& spec, const SgdConfig& cfg,
                                 const InferenceConfig& inf = {},
                                 FitTrace* trace_out = nullptr) {
    StatsEngine fit_engine(spec, attrs, observed.n_nodes());
    auto obs_scaled = fit_engine.compute(observed);
    scale_stats(spec, obs_scaled);
    detail::NewtonFit fit =
        detail::newton_refit(fit_engine, observed, obs_scaled, spec, cfg, inf);
    if (trace_out) *trace_out = fit.trace;

    FitReport rep;
    rep.labels = spec.labels();
    rep.scales = spec.scales();
    rep.converged = fit.converged;
    rep.coef_scaled = fit.theta;
    const int p1 = spec.dim();
    for (int j = 0; j < p1; ++j) {
        rep.coef_raw.push_back(fit.theta[j] / spec.terms[j].scale);
        if (spec.terms[j].excluded) rep.excluded.push_back(rep.labels[j]);
    }

    // Fisher information over the estimated coordinates only; excluded
    // (pinned-zero) terms are not parameters of the refit.
    std::vector<int> active;
    for (int j = 0; j < p1; ++j)
        if (!spec.terms[j].excluded) active.push_back(j);
    const int pa = static_cast<int>(active.size());

    SamplerConfig scfg;
    scfg.m = inf.cov_sample;
    scfg.seed = derive_seed(cfg.seed, 0xC0FULL);
    auto draws = sample(spec, fit.theta, observed, attrs, scfg);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(pa);
    for (const auto& s : draws.stats)
        for (int a = 0; a < pa; ++a) mean[a] += s[active[a]];
    mean /= static_cast<double>(draws.stats.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(pa, pa);
    for (const auto& s : draws.stats) {
        Eigen::VectorXd c(pa);
        for (int a = 0; a < pa; ++a) c[a] = s[active[a]] - mean[a];
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(draws.stats.size() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const double max_ev = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() < 1e-10 * std::max(max_ev, 1e-300)) {
        const Eigen::VectorXd null_dir = eig.eigenvectors().col(0);
        std::string offenders;
        const double top = null_dir.cwiseAbs().maxCoeff();
        for (int a = 0; a < pa; ++a)
            if (std::abs(null_dir[a]) > 0.3 * top)
                offenders += (offenders.empty() ? "" : ", ") + rep.labels[active[a]];
        throw CollinearityError("statistic covariance is singular; collinear terms: " +
                                offenders);
    }
    Eigen::MatrixXd inv = cov.inverse();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.se_scaled.assign(p1, nan);
    rep.se_raw.assign(p1, nan);
    rep.p_value.assign(p1, nan);
    for (int a = 0; a < pa; ++a) {
        const int j = active[a];
        const double se = std::sqrt(inv(a, a));
        rep.se_scaled[j] = se;
        rep.se_raw[j] = se / spec.terms[j].scale;
        const double z = fit.theta[j] / se;
        rep.p_value[j] = std::erfc(std::abs(z) / std::sqrt(2.0));
    }

    rep.loglik = estimate_loglik(observed, attrs, spec, fit.theta, inf,
                                 derive_seed(cfg.seed, 0x10C11ULL));
    rep.n_params = 0;
    for (const auto& t : spec.terms)
        if (!t.excluded) ++rep.n_params;
    rep.aic = 2.0 * rep.n_params - 2.0 * rep.loglik;
    return rep;
}

// ---------------------------------------------------------------------------
// Threshold selection: cumulative unpenalized refits down the ranking.
// ---------------------------------------------------------------------------

enum class Criterion { aic, pvalue };

struct WalkStep {
    std::string added;
    double aic = 0.0;
    double p_added = std::numeric_limits<double>::quiet_NaN();
    bool accepted = false;
    std::string note;
};

struct SelectionResult {
    std::vector<int> selected; // full-spec indices of the non-edges terms kept
    std::vector<WalkStep> walk;
    FitReport report; // final selected model, refit unpenalized
};

inline SelectionResult select_threshold(const PathResult& path, const Network& observed,
                                        const AttributeTable* attrs,
                                        const ModelSpec& spec, Criterion criterion,
                                        double alpha_sig, const SgdConfig& cfg,
                                        const InferenceConfig& inf = {}) {
    auto ranking = rank(path);
    SelectionResult out;

    SgdConfig walk_cfg = cfg;
    walk_cfg.seed = derive_seed(cfg.seed, 0xA1CULL);
    FitReport current = refit_inference(observed, attrs, spec.subset({}), walk_cfg, inf);
    if (!current.converged)
        throw NonconvergenceError("edges-only refit did not converge");
    {
        WalkStep base;
        base.added = "edges";
        base.aic = current.aic;
        base.accepted = true;
        out.walk.push_back(base);
    }

    std::vector<int> kept;
    for (int idx : ranking) {
        if (spec.terms[idx].excluded) continue;
        std::vector<int> cand = kept;
        cand.push_back(idx);
        const ModelSpec cand_spec = spec.subset(cand);
        WalkStep step;
        step.added = path.labels[idx];
        FitReport rep;
        try {
            SgdConfig step_cfg = walk_cfg;
            step_cfg.seed = derive_seed(walk_cfg.seed, static_cast<std::uint64_t>(idx));
            rep = refit_inference(observed, attrs, cand_spec, step_cfg, inf);
        } catch (const Error& e) {
            step.note = std::string("refit failed: ") + e.what();
            out.walk.push_back(step);
            break;
        }
        if (!rep.converged) {
            step.note = "refit did not converge; keeping previous model";
            out.walk.push_back(step);
            break;
        }
        step.aic = rep.aic;
        step.p_added = rep.p_value[cand_spec.term_index(path.labels[idx])];
        const bool accept = criterion == Criterion::aic ? rep.aic < current.aic
                                                        : step.p_added <= alpha_sig;
        step.accepted = accept;
        out.walk.push_back(step);
        if (!accept) break;
        kept = std::move(cand);
        current = std::move(rep);
    }
    out.selected = kept;
    out.report = std::move(current);
    return out;
}

} // namespace ergmlasso
