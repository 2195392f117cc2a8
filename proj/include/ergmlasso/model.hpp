#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergmlasso/attributes.hpp"
#include "ergmlasso/errors.hpp"
#include "ergmlasso/textio.hpp"

namespace ergmlasso {

enum class TermKind {
    Edges,
    Gwesp,
    Gwnsp,
    Gwdegree,
    NodeCov,
    NodeFactor,
    NodeMatch,
};

inline const char* term_kind_name(TermKind k) {
    switch (k) {
        case TermKind::Edges: return "edges";
        case TermKind::Gwesp: return "gwesp";
        case TermKind::Gwnsp: return "gwnsp";
        case TermKind::Gwdegree: return "gwdegree";
        case TermKind::NodeCov: return "nodecov";
        case TermKind::NodeFactor: return "nodefactor";
        case TermKind::NodeMatch: return "nodematch";
    }
    return "?";
}

struct StatTerm {
    TermKind kind = TermKind::Edges;
    double alpha = 0.5;      // decay, fixed by the user; gw terms only
    std::string column;      // attribute terms only
    std::string level;       // NodeFactor only
    double scale = 1.0;      // standardization divisor; 1 = unscaled
    bool penalized = true;
    bool excluded = false;   // zero-SD at standardization; pinned to 0

    bool is_gw() const {
        return kind == TermKind::Gwesp || kind == TermKind::Gwnsp ||
               kind == TermKind::Gwdegree;
    }
    bool uses_column() const {
        return kind == TermKind::NodeCov || kind == TermKind::NodeFactor ||
               kind == TermKind::NodeMatch;
    }
};

inline std::string term_label(const StatTerm& t) {
    switch (t.kind) {
        case TermKind::Edges: return "edges";
        case TermKind::Gwesp: return "gwesp." + format_double(t.alpha);
        case TermKind::Gwnsp: return "gwnsp." + format_double(t.alpha);
        case TermKind::Gwdegree: return "gwdegree." + format_double(t.alpha);
        case TermKind::NodeCov: return "nodecov." + t.column;
        case TermKind::NodeFactor: return "nodefactor." + t.column + "." + t.level;
        case TermKind::NodeMatch: return "nodematch." + t.column;
    }
    return "?";
}

// Ordered term list, edges first. Term 0 is the intercept: unpenalized and
// never rescaled.
struct ModelSpec {
    std::vector<StatTerm> terms;
    ColumnSchema schema;

    int dim() const { return static_cast<int>(terms.size()); }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(terms.size());
        for (auto& t : terms) out.push_back(term_label(t));
        return out;
    }

    std::vector<double> scales() const {
        std::vector<double> out;
        out.reserve(terms.size());
        for (auto& t : terms) out.push_back(t.scale);
        return out;
    }

    int term_index(const std::string& label) const {
        for (int k = 0; k < dim(); ++k)
            if (term_label(terms[k]) == label) return k;
        return -1;
    }

    // Edges plus the given non-edges terms, preserving order and scales.
    ModelSpec subset(const std::vector<int>& keep) const {
        ModelSpec out;
        out.schema = schema;
        out.terms.push_back(terms.at(0));
        std::set<int> chosen(keep.begin(), keep.end());
        for (int k = 1; k < dim(); ++k)
            if (chosen.count(k)) out.terms.push_back(terms[k]);
        return out;
    }

    void validate(const AttributeTable* attrs = nullptr) const;
};

inline void ModelSpec::validate(const AttributeTable* attrs) const {
    if (terms.empty() || terms[0].kind != TermKind::Edges)
        throw SpecError("model spec must start with the edges term");
    if (terms[0].penalized) throw SpecError("edges term must be unpenalized");
    if (terms[0].scale != 1.0) throw SpecError("edges term must keep scale 1");
    std::set<std::string> seen;
    for (size_t k = 0; k < terms.size(); ++k) {
        const StatTerm& t = terms[k];
        if (t.kind == TermKind::Edges && k != 0)
            throw SpecError("exactly one edges term allowed, at position 0");
        if (t.is_gw() && !(t.alpha > 0.0))
            throw SpecError("decay must be positive for " + term_label(t));
        if (!(t.scale > 0.0))
            throw SpecError("scale must be positive for " + term_label(t));
        if (!seen.insert(term_label(t)).second)
            throw SpecError("duplicate term '" + term_label(t) + "'");
        if (!attrs || !t.uses_column()) continue;
        if (!attrs->has_column(t.column))
            throw SpecError("term '" + term_label(t) + "' references missing column '" +
                            t.column + "'");
        if (t.kind == TermKind::NodeCov && attrs->is_categorical(t.column))
            throw SpecError("nodecov column '" + t.column + "' must be numeric");
        if (t.kind != TermKind::NodeCov && !attrs->is_categorical(t.column))
            throw SpecError("term '" + term_label(t) + "' needs a categorical column");
        if (t.kind == TermKind::NodeFactor) {
            const auto& cat = attrs->categorical(t.column);
            int code = cat.code_of(t.level);
            if (code < 0)
                throw SpecError("nodefactor level '" + t.level +
                                "' is not a level of column '" + t.column + "'");
            if (code == cat.reference_code)
                throw SpecError("nodefactor level '" + t.level +
                                "' is the reference level of '" + t.column + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// Spec file: JSON with a term list and the attribute column schema.
//
//   {
//     "terms": [
//       {"kind": "edges"},
//       {"kind": "gwesp", "alpha": 0.5},
//       {"kind": "nodefactor", "column": "office"},           // expands
//       {"kind": "nodematch", "column": "office"}
//     ],
//     "columns": {
//       "office": {"type": "categorical", "reference": "Boston",
//                  "levels": ["Boston", "Hartford", "Providence"]},
//       "age": {"type": "numeric"}
//     }
//   }
//
// A nodefactor term without "level" expands to one term per non-reference
// level. Optional per-term keys: "scale" (fixed override), "penalized",
// "excluded".
// ---------------------------------------------------------------------------

struct SpecFile {
    struct RawTerm {
        StatTerm term;
        bool has_level = false;
        bool has_scale = false;
    };
    std::vector<RawTerm> raw_terms;
    ColumnSchema schema;
};

namespace detail {

inline TermKind parse_term_kind(const std::string& s) {
    for (TermKind k : {TermKind::Edges, TermKind::Gwesp, TermKind::Gwnsp,
                       TermKind::Gwdegree, TermKind::NodeCov,
                       TermKind::NodeFactor, TermKind::NodeMatch})
        if (s == term_kind_name(k)) return k;
    throw SpecError("unknown term kind '" + s + "'");
}

} // namespace detail

inline SpecFile parse_spec_json(const nlohmann::json& j, const std::string& name) {
    SpecFile out;
    if (!j.is_object() || !j.contains("terms") || !j["terms"].is_array())
        throw SpecError(name + ": expected an object with a 'terms' array");
    if (j.contains("columns")) {
        for (auto& [col, decl] : j["columns"].items()) {
            ColumnSchema::Column c;
            const std::string type = decl.value("type", "");
            if (type == "numeric") {
                c.categorical = false;
            } else if (type == "categorical") {
                c.categorical = true;
                c.reference = decl.value("reference", "");
                if (decl.contains("levels"))
                    for (auto& lv : decl["levels"]) c.levels.push_back(lv.get<std::string>());
            } else {
                throw SpecError(name + ": column '" + col +
                                "' must declare type numeric or categorical");
            }
            out.schema.columns[col] = std::move(c);
        }
    }
    for (auto& tj : j["terms"]) {
        SpecFile::RawTerm raw;
        raw.term.kind = detail::parse_term_kind(tj.value("kind", ""));
        // gwdegree keeps a larger default decay: at 0.5 the weights saturate
        // once degrees pass ~5 and the statistic degenerates to a constant
        // on mid-density networks
        if (raw.term.kind == TermKind::Gwdegree) raw.term.alpha = 2.0;
        if (tj.contains("alpha")) raw.term.alpha = tj["alpha"].get<double>();
        if (tj.contains("column")) raw.term.column = tj["column"].get<std::string>();
        if (tj.contains("level")) {
            raw.term.level = tj["level"].get<std::string>();
            raw.has_level = true;
        }
        if (tj.contains("scale")) {
            raw.term.scale = tj["scale"].get<double>();
            raw.has_scale = true;
        }
        raw.term.penalized = tj.value("penalized", raw.term.kind != TermKind::Edges);
        raw.term.excluded = tj.value("excluded", false);
        if (raw.term.uses_column() && raw.term.column.empty())
            throw SpecError(name + ": term '" + std::string(term_kind_name(raw.term.kind)) +
                            "' needs a 'column'");
        if (raw.term.uses_column() && !out.schema.columns.count(raw.term.column))
            throw SpecError(name + ": term column '" + raw.term.column +
                            "' is not declared under 'columns'");
        out.raw_terms.push_back(std::move(raw));
    }
    return out;
}

inline SpecFile load_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model spec '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return parse_spec_json(j, path);
}

// Expands level-less nodefactor terms against the attribute data and
// validates the result. attrs may be null for purely structural specs.
inline ModelSpec resolve_spec(const SpecFile& file, const AttributeTable* attrs) {
    ModelSpec spec;
    spec.schema = file.schema;
    for (const auto& raw : file.raw_terms) {
        if (raw.term.kind == TermKind::NodeFactor && !raw.has_level) {
            if (!attrs)
                throw SpecError("nodefactor '" + raw.term.column +
                                "' needs attribute data to expand levels");
            const auto& cat = attrs->categorical(raw.term.column);
            for (size_t code = 0; code < cat.levels.size(); ++code) {
                if (static_cast<int>(code) == cat.reference_code) continue;
                StatTerm t = raw.term;
                t.level = cat.levels[code];
                spec.terms.push_back(std::move(t));
            }
            continue;
        }
        spec.terms.push_back(raw.term);
    }
    spec.validate(attrs);
    return spec;
}

inline nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
    nlohmann::ordered_json j;
    j["terms"] = nlohmann::ordered_json::array();
    for (const auto& t : spec.terms) {
        nlohmann::ordered_json tj;
        tj["kind"] = term_kind_name(t.kind);
        if (t.is_gw()) tj["alpha"] = t.alpha;
        if (t.uses_column()) tj["column"] = t.column;
        if (t.kind == TermKind::NodeFactor) tj["level"] = t.level;
        tj["scale"] = t.scale;
        tj["penalized"] = t.penalized;
        if (t.excluded) tj["excluded"] = true;
        j["terms"].push_back(std::move(tj));
    }
    nlohmann::ordered_json cols = nlohmann::ordered_json::object();
    for (auto& [name, c] : spec.schema.columns) {
        nlohmann::ordered_json cj;
        cj["type"] = c.categorical ? "categorical" : "numeric";
        if (c.categorical) {
            cj["reference"] = c.reference;
            if (!c.levels.empty()) cj["levels"] = c.levels;
        }
        cols[name] = std::move(cj);
    }
    j["columns"] = std::move(cols);
    return j;
}

} // namespace ergmlasso
