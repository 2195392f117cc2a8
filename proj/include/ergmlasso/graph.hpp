#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ergmlasso/errors.hpp"

namespace ergmlasso {

inline long dyad_count(int n) { return static_cast<long>(n) * (n - 1) / 2; }

// Linear index of the unordered pair {i, j}, i < j, in row-major upper
// triangular order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
inline long dyad_index(int n, int i, int j) {
    if (i > j) std::swap(i, j);
    return static_cast<long>(i) * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> dyad_at(int n, long k) {
    int i = 0;
    long row = n - 1;
    while (k >= row) {
        k -= row;
        --row;
        ++i;
    }
    return {i, i + 1 + static_cast<int>(k)};
}

// Undirected simple graph on nodes 0..n-1. Adjacency as packed bit rows:
// O(1) edge tests, popcount-based shared-partner queries, O(n/64) neighbour
// scans. These dominate the MCMC inner loop.
class Network {
public:
    explicit Network(int n = 0)
        : n_(n),
          words_(n > 0 ? (n + 63) / 64 : 0),
          rows_(static_cast<size_t>(n) * words_, 0),
          degree_(n, 0) {}

    int n_nodes() const { return n_; }
    long edge_count() const { return edge_count_; }
    long dyads() const { return dyad_count(n_); }

    bool has_edge(int i, int j) const {
        return (rows_[static_cast<size_t>(i) * words_ + (j >> 6)] >> (j & 63)) & 1u;
    }

    int degree(int i) const { return degree_[i]; }
    const std::vector<int>& degrees() const { return degree_; }

    void toggle(int i, int j) {
        check_dyad(i, j);
        const int delta = has_edge(i, j) ? -1 : 1;
        flip_bit(i, j);
        flip_bit(j, i);
        degree_[i] += delta;
        degree_[j] += delta;
        edge_count_ += delta;
    }

    void set_edge(int i, int j, bool present) {
        check_dyad(i, j);
        if (has_edge(i, j) != present) toggle(i, j);
    }

    // |{k : k~i and k~j}|; bits i and j are never set in their own rows,
    // so the AND automatically excludes the endpoints.
    int shared_partners(int i, int j) const {
        if (i == j) throw UsageError("shared_partners: i == j");
        check_node(i);
        check_node(j);
        const std::uint64_t* a = row_ptr(i);
        const std::uint64_t* b = row_ptr(j);
        int c = 0;
        for (int w = 0; w < words_; ++w) c += std::popcount(a[w] & b[w]);
        return c;
    }

    template <typename F>
    void for_neighbors(int i, F&& f) const {
        const std::uint64_t* a = row_ptr(i);
        for (int w = 0; w < words_; ++w) {
            std::uint64_t bits = a[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                f(w * 64 + b);
                bits &= bits - 1;
            }
        }
    }

    const std::uint64_t* row_ptr(int i) const {
        return rows_.data() + static_cast<size_t>(i) * words_;
    }
    int words() const { return words_; }

    // Dyad occupancy bitmask, LSB = dyad 0. Only valid when dyads() <= 64;
    // the exact-enumeration oracle and small-graph tests use this.
    std::uint64_t dyad_bitmask() const {
        std::uint64_t mask = 0;
        long k = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j, ++k)
                if (has_edge(i, j)) mask |= 1ULL << k;
        return mask;
    }

    bool operator==(const Network& o) const {
        return n_ == o.n_ && rows_ == o.rows_;
    }

private:
    void check_node(int i) const {
        if (i < 0 || i >= n_) throw UsageError("node index out of range");
    }
    void check_dyad(int i, int j) const {
        check_node(i);
        check_node(j);
        if (i == j) throw UsageError("self-loop dyad (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    void flip_bit(int i, int j) {
        rows_[static_cast<size_t>(i) * words_ + (j >> 6)] ^= 1ULL << (j & 63);
    }

    int n_;
    int words_;
    std::vector<std::uint64_t> rows_;
    std::vector<int> degree_;
    long edge_count_ = 0;
};

// Network plus the original node identifiers from the input files. Internal
// node numbering is dense 0..n-1; outputs are written with the ids.
struct LabeledNetwork {
    Network net;
    std::vector<std::string> node_ids;

    int index_of(const std::string& id) const {
        for (size_t k = 0; k < node_ids.size(); ++k)
            if (node_ids[k] == id) return static_cast<int>(k);
        return -1;
    }
};

namespace detail {

struct ParsedEdgeList {
    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<std::string> order; // ids in order of first appearance
};

inline ParsedEdgeList parse_edge_list(std::istream& in, const std::string& name) {
    ParsedEdgeList out;
    std::unordered_map<std::string, int> seen;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ss(line);
        std::string a, b, extra;
        if (!(ss >> a)) continue; // blank
        if (!(ss >> b) || (ss >> extra))
            throw InputError(name + ":" + std::to_string(lineno) +
                             ": expected exactly two node ids per edge line");
        if (a == b)
            throw InputError(name + ":" + std::to_string(lineno) +
                             ": self-loop '" + a + "'");
        for (const auto& id : {a, b})
            if (seen.emplace(id, static_cast<int>(out.order.size())).second)
                out.order.push_back(id);
        out.edges.emplace_back(a, b);
    }
    return out;
}

} // namespace detail

// Node universe: the given id list when non-empty (attribute-file order),
// otherwise order of first appearance in the edge list.
inline LabeledNetwork load_edge_list(std::istream& in, const std::string& name,
                                     const std::vector<std::string>& universe = {}) {
    auto parsed = detail::parse_edge_list(in, name);
    LabeledNetwork out;
    out.node_ids = universe.empty() ? parsed.order : universe;
    std::unordered_map<std::string, int> index;
    for (size_t k = 0; k < out.node_ids.size(); ++k) {
        if (!index.emplace(out.node_ids[k], static_cast<int>(k)).second)
            throw InputError(name + ": duplicate node id '" + out.node_ids[k] + "'");
    }
    out.net = Network(static_cast<int>(out.node_ids.size()));
    for (auto& [a, b] : parsed.edges) {
        auto ia = index.find(a), ib = index.find(b);
        if (ia == index.end())
            throw InputError(name + ": edge node '" + a + "' not in attribute table");
        if (ib == index.end())
            throw InputError(name + ": edge node '" + b + "' not in attribute table");
        out.net.set_edge(ia->second, ib->second, true);
    }
    return out;
}

inline LabeledNetwork load_edge_list_file(const std::string& path,
                                          const std::vector<std::string>& universe = {}) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open edge list '" + path + "'");
    return load_edge_list(in, path, universe);
}

inline void write_edge_list(std::ostream& out, const Network& net,
                            const std::vector<std::string>& ids) {
    const int n = net.n_nodes();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (net.has_edge(i, j)) out << ids[i] << ' ' << ids[j] << '\n';
}

inline void write_edge_list_file(const std::string& path, const Network& net,
                                 const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write edge list '" + path + "'");
    write_edge_list(out, net, ids);
}

} // namespace ergmlasso
