#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ergmlasso/stats.hpp"

namespace ergmlasso {

struct ExactMoments {
    std::vector<double> mean;
    Eigen::MatrixXd cov;
};

// Brute-force reference model for tiny networks: enumerates all 2^D graphs
// and answers normalizing-constant, moment, and (penalized) MLE queries
// exactly. Ground truth for the simulation-based estimators.
class ExactModel {
public:
    static constexpr int max_nodes = 7;

    ExactModel(const ModelSpec& spec, const AttributeTable* attrs, int n)
        : spec_(spec), n_(n), dyads_(dyad_count(n)) {
        if (n > max_nodes)
            throw CapacityError("exact enumeration capped at " +
                                std::to_string(max_nodes) + " nodes (got " +
                                std::to_string(n) + ")");
        if (n < 2) throw UsageError("exact model needs at least 2 nodes");
        StatsEngine engine(spec, attrs, n);
        p1_ = engine.dim();
        rows_ = 1ULL << dyads_;
        stat_.resize(rows_ * p1_);
        std::vector<double> inv_scale(p1_);
        for (int k = 0; k < p1_; ++k) inv_scale[k] = 1.0 / spec.terms[k].scale;

        // Gray-code order: one dyad toggles per step, the statistic row is
        // recomputed from scratch so this table stays independent of the
        // incremental change-statistic path it is used to verify.
        Network net(n);
        std::vector<double> s(p1_);
        auto store = [&](std::uint64_t gray) {
            engine.compute(net, s.data());
            double* row = stat_.data() + gray * p1_;
            for (int k = 0; k < p1_; ++k) row[k] = s[k] * inv_scale[k];
        };
        store(0);
        for (std::uint64_t k = 1; k < rows_; ++k) {
            const int bit = std::countr_zero(k);
            auto [i, j] = dyad_at(n, bit);
            net.toggle(i, j);
            store(k ^ (k >> 1));
        }
    }

    int dim() const { return p1_; }
    int n_nodes() const { return n_; }
    long dyads() const { return dyads_; }
    std::uint64_t graph_count() const { return rows_; }
    const ModelSpec& spec() const { return spec_; }

    // Statistic row of the graph whose dyad bitmask is `mask` (scaled units).
    std::span<const double> stats_of(std::uint64_t mask) const {
        return {stat_.data() + mask * p1_, static_cast<size_t>(p1_)};
    }

    double log_kappa(std::span<const double> theta) const {
        check_theta(theta);
        double maxw = -std::numeric_limits<double>::infinity();
        std::vector<double> w(rows_);
        for (std::uint64_t r = 0; r < rows_; ++r) {
            const double* row = stat_.data() + r * p1_;
            double acc = 0.0;
            for (int k = 0; k < p1_; ++k) acc += row[k] * theta[k];
            w[r] = acc;
            maxw = std::max(maxw, acc);
        }
        double sum = 0.0;
        for (std::uint64_t r = 0; r < rows_; ++r) sum += std::exp(w[r] - maxw);
        return maxw + std::log(sum);
    }

    std::vector<double> probabilities(std::span<const double> theta) const {
        const double lk = log_kappa(theta);
        std::vector<double> p(rows_);
        for (std::uint64_t r = 0; r < rows_; ++r) {
            const double* row = stat_.data() + r * p1_;
            double acc = 0.0;
            for (int k = 0; k < p1_; ++k) acc += row[k] * theta[k];
            p[r] = std::exp(acc - lk);
        }
        return p;
    }

    ExactMoments exact_moments(std::span<const double> theta) const {
        auto p = probabilities(theta);
        ExactMoments out;
        out.mean.assign(p1_, 0.0);
        for (std::uint64_t r = 0; r < rows_; ++r) {
            const double* row = stat_.data() + r * p1_;
            for (int k = 0; k < p1_; ++k) out.mean[k] += p[r] * row[k];
        }
        out.cov = Eigen::MatrixXd::Zero(p1_, p1_);
        for (std::uint64_t r = 0; r < rows_; ++r) {
            const double* row = stat_.data() + r * p1_;
            for (int a = 0; a < p1_; ++a) {
                const double da = row[a] - out.mean[a];
                for (int b = a; b < p1_; ++b)
                    out.cov(a, b) += p[r] * da * (row[b] - out.mean[b]);
            }
        }
        for (int a = 0; a < p1_; ++a)
            for (int b = 0; b < a; ++b) out.cov(a, b) = out.cov(b, a);
        return out;
    }

    double loglik(std::span<const double> observed, std::span<const double> theta) const {
        double acc = 0.0;
        for (int k = 0; k < p1_; ++k) acc += observed[k] * theta[k];
        return acc - log_kappa(theta);
    }

    // Newton-Raphson on the exact moments with backtracking; converges to
    // E_theta[s] = s_obs within 1e-8 or reports a degenerate MLE.
    std::vector<double> exact_mle(std::span<const double> observed,
                                  double tol = 1e-8, int max_iter = 200) const {
        check_theta_dim(observed.size());
        check_interior(observed);
        std::vector<double> theta(p1_, 0.0);
        double f = loglik(observed, theta);
        for (int it = 0; it < max_iter; ++it) {
            auto mom = exact_moments(theta);
            double resid = 0.0;
            Eigen::VectorXd g(p1_);
            for (int k = 0; k < p1_; ++k) {
                g[k] = observed[k] - mom.mean[k];
                resid = std::max(resid, std::abs(g[k]));
            }
            if (resid < tol) return theta;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(mom.cov);
            if (ldlt.info() != Eigen::Success)
                throw DegeneracyError("singular statistic covariance in exact MLE");
            Eigen::VectorXd step = ldlt.solve(g);
            double scale = 1.0;
            for (int half = 0; half < 40; ++half) {
                std::vector<double> cand(p1_);
                for (int k = 0; k < p1_; ++k) cand[k] = theta[k] + scale * step[k];
                const double fc = loglik(observed, cand);
                if (std::isfinite(fc) && fc >= f) {
                    theta = std::move(cand);
                    f = fc;
                    break;
                }
                scale *= 0.5;
            }
            double norm = 0.0;
            for (double t : theta) norm = std::max(norm, std::abs(t));
            if (!std::isfinite(norm) || norm > 100.0)
                throw DegeneracyError(
                    "exact MLE diverged; observed statistics on or outside the "
                    "attainable hull");
        }
        throw DegeneracyError("exact MLE did not converge");
    }

    // Maximizer of s_obs . theta - log kappa(theta) - sum_j lambda_j |theta_j|
    // by cyclic coordinate ascent with an explicit zero test: a penalized
    // coordinate sits exactly at zero whenever its score at zero is inside
    // the subgradient band |obs_j - E[s_j]| <= lambda_j; otherwise the 1-D
    // stationarity equation E[s_j] = obs_j -/+ lambda_j is solved on the
    // profile distribution by safeguarded Newton. The profile moment
    // equation gives coordinate locations to near machine precision, which
    // a value-comparison line search cannot.
    std::vector<double> exact_penalized(std::span<const double> observed,
                                        std::span<const double> lambda,
                                        double tol = 1e-9, int max_sweeps = 20000) const {
        check_theta_dim(observed.size());
        check_theta_dim(lambda.size());
        std::vector<double> theta(p1_, 0.0);
        std::vector<double> base(rows_), col(rows_);
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double max_move = 0.0;
            for (int j = 0; j < p1_; ++j) {
                if (spec_.terms[j].excluded) continue;
                const double lam = spec_.terms[j].penalized ? lambda[j] : 0.0;
                // Freeze all coordinates but j: w_r(t) = base_r + col_r * t.
                for (std::uint64_t r = 0; r < rows_; ++r) {
                    const double* row = stat_.data() + r * p1_;
                    double acc = 0.0;
                    for (int k = 0; k < p1_; ++k)
                        if (k != j) acc += row[k] * theta[k];
                    base[r] = acc;
                    col[r] = row[j];
                }

                const double old = theta[j];
                double next;
                if (lam > 0.0) {
                    const double grad0 = observed[j] - profile_mean(base, col, 0.0).first;
                    if (std::abs(grad0) <= lam) {
                        next = 0.0;
                    } else {
                        const double dir = grad0 > 0 ? 1.0 : -1.0;
                        next = solve_profile(base, col, observed[j] - lam * dir,
                                             old != 0.0 ? old : 0.0,
                                             term_label(spec_.terms[j]));
                        if (next * dir < 0) next = 0.0;
                    }
                } else {
                    next = solve_profile(base, col, observed[j], old,
                                         term_label(spec_.terms[j]));
                }
                theta[j] = next;
                max_move = std::max(max_move, std::abs(next - old));
            }
            if (max_move < tol && sweep > 0) return theta;
        }
        throw NonconvergenceError("exact penalized optimizer did not converge");
    }

    std::vector<double> exact_penalized(std::span<const double> observed,
                                        double lambda) const {
        std::vector<double> lam(p1_, lambda);
        return exact_penalized(observed, lam);
    }

    // Smallest penalty that zeroes every penalized coordinate: the largest
    // absolute score of a penalized statistic at the edges-only optimum.
    double full_shrinkage_lambda(std::span<const double> observed) const {
        std::vector<double> theta(p1_, 0.0);
        for (int it = 0; it < 200; ++it) {
            auto mom = exact_moments(theta);
            const double g = observed[0] - mom.mean[0];
            if (std::abs(g) < 1e-11) break;
            theta[0] += g / std::max(mom.cov(0, 0), 1e-12);
        }
        auto mom = exact_moments(theta);
        double lam = 0.0;
        for (int j = 1; j < p1_; ++j)
            if (spec_.terms[j].penalized && !spec_.terms[j].excluded)
                lam = std::max(lam, std::abs(observed[j] - mom.mean[j]));
        return lam;
    }

    // Penalty at which coordinate j switches between zero and nonzero, by
    // bisection; the exact counterpart of the grid importance score.
    double activation_lambda(std::span<const double> observed, int j,
                             double rel_tol = 1e-4) const {
        if (j <= 0 || j >= p1_ || !spec_.terms[j].penalized)
            throw UsageError("activation lambda is defined for penalized terms only");
        double hi = full_shrinkage_lambda(observed) * 1.0001 + 1e-12;
        double lo = 0.0;
        if (exact_penalized(observed, hi)[j] != 0.0)
            throw NumericalError("coordinate still active at full-shrinkage penalty");
        while (hi - lo > rel_tol * hi) {
            const double mid = 0.5 * (lo + hi);
            if (exact_penalized(observed, mid)[j] == 0.0)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    void check_theta(std::span<const double> theta) const {
        check_theta_dim(theta.size());
    }
    void check_theta_dim(size_t len) const {
        if (static_cast<int>(len) != p1_)
            throw UsageError("vector length does not match model dimension");
    }

    // An MLE exists only if every observed statistic is strictly between the
    // attainable minimum and maximum (a necessary interiority condition that
    // catches the boundary cases, e.g. complete or empty observed graphs).
    void check_interior(std::span<const double> observed) const {
        for (int j = 0; j < p1_; ++j) {
            double lo = stat_[j], hi = stat_[j];
            for (std::uint64_t r = 1; r < rows_; ++r) {
                lo = std::min(lo, stat_[r * p1_ + j]);
                hi = std::max(hi, stat_[r * p1_ + j]);
            }
            if (!(observed[j] > lo && observed[j] < hi))
                throw DegeneracyError("observed statistic '" +
                                      term_label(spec_.terms[j]) +
                                      "' sits on the attainable boundary; the MLE "
                                      "is degenerate");
        }
    }

    // Mean and variance of the column under p_r(t) proportional to
    // exp(base_r + col_r * t).
    static std::pair<double, double> profile_mean(const std::vector<double>& base,
                                                  const std::vector<double>& col,
                                                  double t) {
        double maxw = -std::numeric_limits<double>::infinity();
        for (size_t r = 0; r < base.size(); ++r)
            maxw = std::max(maxw, base[r] + col[r] * t);
        double sum = 0.0, acc = 0.0, acc2 = 0.0;
        for (size_t r = 0; r < base.size(); ++r) {
            const double e = std::exp(base[r] + col[r] * t - maxw);
            sum += e;
            acc += e * col[r];
            acc2 += e * col[r] * col[r];
        }
        const double mean = acc / sum;
        return {mean, std::max(0.0, acc2 / sum - mean * mean)};
    }

    // Solves E_t[col] = target for t. The profile mean is increasing in t, so
    // a sign-change bracket plus Newton steps (falling back to bisection when
    // a step leaves the bracket) converges to machine precision.
    static double solve_profile(const std::vector<double>& base,
                                const std::vector<double>& col, double target,
                                double init, const std::string& label) {
        auto miss = [&](double t) { return profile_mean(base, col, t).first - target; };
        double lo = init, hi = init;
        double m_lo = miss(lo), m_hi = m_lo;
        double step = 1.0;
        for (int grow = 0; m_lo > 0.0; ++grow) {
            if (grow >= 200)
                throw DegeneracyError("coordinate '" + label +
                                      "' has no stationary point; observed statistic "
                                      "at the attainable boundary");
            lo -= step;
            step *= 2.0;
            m_lo = miss(lo);
        }
        step = 1.0;
        for (int grow = 0; m_hi < 0.0; ++grow) {
            if (grow >= 200)
                throw DegeneracyError("coordinate '" + label +
                                      "' has no stationary point; observed statistic "
                                      "at the attainable boundary");
            hi += step;
            step *= 2.0;
            m_hi = miss(hi);
        }
        double t = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            auto [mean, var] = profile_mean(base, col, t);
            const double m = mean - target;
            if (m > 0.0) hi = t;
            else lo = t;
            if (std::abs(m) < 1e-13 * (1.0 + std::abs(target)) ||
                hi - lo < 1e-14 * (1.0 + std::abs(t)))
                return t;
            double tn = t - m / std::max(var, 1e-300);
            if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
            t = tn;
        }
        return t;
    }

    ModelSpec spec_;
    int n_;
    long dyads_;
    int p1_ = 0;
    std::uint64_t rows_ = 0;
    std::vector<double> stat_; // rows x p1, scaled units
};

} // namespace ergmlasso
