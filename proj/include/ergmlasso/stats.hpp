#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ergmlasso/attributes.hpp"
#include "ergmlasso/graph.hpp"
#include "ergmlasso/model.hpp"

namespace ergmlasso {

// Geometric weight of a count k under decay alpha:
//   w(k) = e^a * (1 - (1 - e^-a)^k),  w(0) = 0.
// gwesp sums w over edgewise shared-partner counts, gwnsp over non-edgewise
// counts, gwdegree over node degrees.
inline std::vector<double> gw_weight_table(double alpha, int max_count) {
    std::vector<double> w(static_cast<size_t>(max_count) + 1, 0.0);
    const double ea = std::exp(alpha);
    const double base = 1.0 - std::exp(-alpha);
    double pw = 1.0;
    for (int k = 1; k <= max_count; ++k) {
        pw *= base;
        w[k] = ea * (1.0 - pw);
    }
    return w;
}

// Resolves a ModelSpec against a network size and attribute table once, then
// serves full statistic vectors and per-dyad change statistics. change() is
// the sampler's inner loop: O(deg(i) + deg(j)) shared-partner queries.
class StatsEngine {
public:
    StatsEngine(const ModelSpec& spec, const AttributeTable* attrs, int n_nodes)
        : spec_(spec), n_(n_nodes) {
        spec.validate(attrs);
        if (attrs && attrs->n_nodes() != n_nodes)
            throw UsageError("attribute table has " + std::to_string(attrs->n_nodes()) +
                             " rows for a network of " + std::to_string(n_nodes) + " nodes");
        terms_.reserve(spec.terms.size());
        auto columns = [&](const StatTerm& t) -> const AttributeTable& {
            if (!attrs)
                throw SpecError("term '" + term_label(t) + "' needs attribute data");
            return *attrs;
        };
        for (const auto& t : spec.terms) {
            TermData td;
            td.kind = t.kind;
            if (t.is_gw()) td.weights = gw_weight_table(t.alpha, n_nodes + 1);
            switch (t.kind) {
                case TermKind::NodeCov:
                    td.values = columns(t).numeric(t.column);
                    break;
                case TermKind::NodeFactor: {
                    const auto& cat = columns(t).categorical(t.column);
                    const int code = cat.code_of(t.level);
                    td.values.resize(n_, 0.0);
                    for (int v = 0; v < n_; ++v)
                        td.values[v] = (cat.codes[v] == code) ? 1.0 : 0.0;
                    break;
                }
                case TermKind::NodeMatch: {
                    const auto& cat = columns(t).categorical(t.column);
                    td.codes = cat.codes;
                    break;
                }
                default:
                    break;
            }
            if (t.kind == TermKind::Gwesp) esp_terms_.push_back(static_cast<int>(terms_.size()));
            if (t.kind == TermKind::Gwnsp) nsp_terms_.push_back(static_cast<int>(terms_.size()));
            terms_.push_back(std::move(td));
        }
    }

    int dim() const { return static_cast<int>(terms_.size()); }
    int n_nodes() const { return n_; }
    const ModelSpec& spec() const { return spec_; }

    void compute(const Network& net, double* out) const {
        const int p1 = dim();
        for (int k = 0; k < p1; ++k) out[k] = 0.0;
        const bool want_esp = !esp_terms_.empty();
        const bool want_nsp = !nsp_terms_.empty();
        for (int i = 0; i < n_; ++i) {
            for (int j = i + 1; j < n_; ++j) {
                const bool edge = net.has_edge(i, j);
                if (edge) {
                    for (int k = 0; k < p1; ++k) {
                        const TermData& td = terms_[k];
                        switch (td.kind) {
                            case TermKind::Edges: out[k] += 1.0; break;
                            case TermKind::NodeCov:
                            case TermKind::NodeFactor:
                                out[k] += td.values[i] + td.values[j];
                                break;
                            case TermKind::NodeMatch:
                                out[k] += (td.codes[i] == td.codes[j]) ? 1.0 : 0.0;
                                break;
                            default: break;
                        }
                    }
                    if (want_esp) {
                        const int c = net.shared_partners(i, j);
                        for (int k : esp_terms_) out[k] += terms_[k].weights[c];
                    }
                } else if (want_nsp) {
                    const int c = net.shared_partners(i, j);
                    for (int k : nsp_terms_) out[k] += terms_[k].weights[c];
                }
            }
        }
        for (int k = 0; k < p1; ++k) {
            if (terms_[k].kind != TermKind::Gwdegree) continue;
            const auto& w = terms_[k].weights;
            for (int v = 0; v < n_; ++v) out[k] += w[net.degree(v)];
        }
    }

    std::vector<double> compute(const Network& net) const {
        std::vector<double> out(dim());
        compute(net, out.data());
        return out;
    }

    // s(y with dyad on) - s(y with dyad off), all other dyads at their
    // current state. Works whether the dyad is currently on or off.
    void change(const Network& net, int i, int j, double* out) const {
        const int p1 = dim();
        const bool present = net.has_edge(i, j);
        const int adj = present ? 1 : 0;
        for (int k = 0; k < p1; ++k) {
            const TermData& td = terms_[k];
            switch (td.kind) {
                case TermKind::Edges: out[k] = 1.0; break;
                case TermKind::NodeCov:
                case TermKind::NodeFactor:
                    out[k] = td.values[i] + td.values[j];
                    break;
                case TermKind::NodeMatch:
                    out[k] = (td.codes[i] == td.codes[j]) ? 1.0 : 0.0;
                    break;
                case TermKind::Gwdegree: {
                    const int di = net.degree(i) - adj;
                    const int dj = net.degree(j) - adj;
                    out[k] = td.weights[di + 1] - td.weights[di] +
                             td.weights[dj + 1] - td.weights[dj];
                    break;
                }
                default: out[k] = 0.0; break;
            }
        }
        if (esp_terms_.empty() && nsp_terms_.empty()) return;

        // The pair itself switches between the esp and nsp sums; its own
        // shared-partner count does not depend on its own edge state.
        const int c = net.shared_partners(i, j);
        for (int k : esp_terms_) out[k] += terms_[k].weights[c];
        for (int k : nsp_terms_) out[k] -= terms_[k].weights[c];

        // Adding (i,j) makes j a new shared partner of every pair {i,v} with
        // v ~ j, and i a new shared partner of every pair {j,v} with v ~ i.
        // When the edge is currently present, the count seen now includes
        // that contribution, hence the -adj.
        auto bump = [&](int a, int v) {
            const int sp = net.shared_partners(a, v) - adj;
            if (net.has_edge(a, v)) {
                for (int k : esp_terms_)
                    out[k] += terms_[k].weights[sp + 1] - terms_[k].weights[sp];
            } else {
                for (int k : nsp_terms_)
                    out[k] += terms_[k].weights[sp + 1] - terms_[k].weights[sp];
            }
        };
        net.for_neighbors(j, [&](int v) {
            if (v != i) bump(i, v);
        });
        net.for_neighbors(i, [&](int v) {
            if (v != j) bump(j, v);
        });
    }

    std::vector<double> change(const Network& net, int i, int j) const {
        std::vector<double> out(dim());
        change(net, i, j, out.data());
        return out;
    }

private:
    struct TermData {
        TermKind kind;
        std::vector<double> weights; // gw terms
        std::vector<double> values;  // nodecov values / nodefactor indicators
        std::vector<int> codes;      // nodematch level codes
    };

    ModelSpec spec_;
    int n_;
    std::vector<TermData> terms_;
    std::vector<int> esp_terms_;
    std::vector<int> nsp_terms_;
};

inline std::vector<double> compute_stats(const Network& net,
                                         const AttributeTable* attrs,
                                         const ModelSpec& spec) {
    return StatsEngine(spec, attrs, net.n_nodes()).compute(net);
}

inline std::vector<double> change_stats(const Network& net,
                                        const AttributeTable* attrs,
                                        const ModelSpec& spec, int i, int j) {
    if (i == j || i < 0 || j < 0 || i >= net.n_nodes() || j >= net.n_nodes())
        throw UsageError("change_stats: invalid dyad");
    return StatsEngine(spec, attrs, net.n_nodes()).change(net, i, j);
}

inline void scale_stats(const ModelSpec& spec, std::span<double> s) {
    for (size_t k = 0; k < s.size(); ++k) s[k] /= spec.terms[k].scale;
}

inline std::vector<double> scaled_stats(const Network& net,
                                        const AttributeTable* attrs,
                                        const ModelSpec& spec) {
    auto s = compute_stats(net, attrs, spec);
    scale_stats(spec, s);
    return s;
}

} // namespace ergmlasso
