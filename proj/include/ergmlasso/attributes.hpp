#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ergmlasso/errors.hpp"

namespace ergmlasso {

// Column typing declared in the model-spec file: each attribute column is
// numeric or categorical; categorical columns name a reference level and may
// pin the level set (otherwise levels are inferred, sorted, from the data).
struct ColumnSchema {
    struct Column {
        bool categorical = false;
        std::vector<std::string> levels;
        std::string reference;
    };
    std::map<std::string, Column> columns;
};

struct NumericColumn {
    std::vector<double> values;
};

struct CategoricalColumn {
    std::vector<int> codes; // per node, index into levels
    std::vector<std::string> levels;
    int reference_code = 0;

    int code_of(const std::string& level) const {
        for (size_t k = 0; k < levels.size(); ++k)
            if (levels[k] == level) return static_cast<int>(k);
        return -1;
    }
};

class AttributeTable {
public:
    AttributeTable() = default;
    explicit AttributeTable(std::vector<std::string> node_ids)
        : node_ids_(std::move(node_ids)) {}

    const std::vector<std::string>& node_ids() const { return node_ids_; }
    int n_nodes() const { return static_cast<int>(node_ids_.size()); }

    bool has_column(const std::string& name) const {
        return columns_.count(name) > 0;
    }

    bool is_categorical(const std::string& name) const {
        auto it = columns_.find(name);
        return it != columns_.end() &&
               std::holds_alternative<CategoricalColumn>(it->second);
    }

    const std::vector<double>& numeric(const std::string& name) const {
        auto it = columns_.find(name);
        if (it == columns_.end())
            throw SpecError("attribute column '" + name + "' not found");
        auto* col = std::get_if<NumericColumn>(&it->second);
        if (!col)
            throw SpecError("attribute column '" + name + "' is not numeric");
        return col->values;
    }

    const CategoricalColumn& categorical(const std::string& name) const {
        auto it = columns_.find(name);
        if (it == columns_.end())
            throw SpecError("attribute column '" + name + "' not found");
        auto* col = std::get_if<CategoricalColumn>(&it->second);
        if (!col)
            throw SpecError("attribute column '" + name + "' is not categorical");
        return *col;
    }

    void add_numeric(const std::string& name, std::vector<double> values) {
        require_rows(name, values.size());
        columns_[name] = NumericColumn{std::move(values)};
    }

    void add_categorical(const std::string& name, CategoricalColumn col) {
        require_rows(name, col.codes.size());
        columns_[name] = std::move(col);
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> out;
        for (auto& [name, _] : columns_) out.push_back(name);
        return out;
    }

    static AttributeTable load_csv(std::istream& in, const std::string& name,
                                   const ColumnSchema& schema);
    static AttributeTable load_csv_file(const std::string& path,
                                        const ColumnSchema& schema) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open attribute file '" + path + "'");
        return load_csv(in, path, schema);
    }

    void write_csv(std::ostream& out) const;

private:
    void require_rows(const std::string& name, size_t rows) const {
        if (rows != node_ids_.size())
            throw UsageError("column '" + name + "' has " + std::to_string(rows) +
                             " rows, expected " + std::to_string(node_ids_.size()));
    }

    std::vector<std::string> node_ids_;
    std::map<std::string, std::variant<NumericColumn, CategoricalColumn>> columns_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw InputError(where + ": cannot parse numeric value '" + s + "'");
    return v;
}

} // namespace detail

inline AttributeTable AttributeTable::load_csv(std::istream& in,
                                               const std::string& name,
                                               const ColumnSchema& schema) {
    std::string line;
    if (!std::getline(in, line))
        throw InputError(name + ": empty attribute file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 1 || header[0].empty())
        throw InputError(name + ": header must start with the node id column");

    std::map<std::string, size_t> col_pos;
    for (size_t c = 1; c < header.size(); ++c) col_pos[header[c]] = c;
    for (auto& [col, _] : schema.columns)
        if (!col_pos.count(col))
            throw InputError(name + ": declared column '" + col +
                             "' not present in attribute file");

    std::vector<std::string> ids;
    std::map<std::string, std::vector<std::string>> raw;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw InputError(name + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        ids.push_back(fields[0]);
        for (auto& [col, pos] : col_pos) {
            const std::string& v = fields[pos];
            if (schema.columns.count(col) && v.empty())
                throw InputError(name + ":" + std::to_string(lineno) +
                                 ": missing value for column '" + col + "'");
            raw[col].push_back(v);
        }
    }
    {
        std::set<std::string> uniq(ids.begin(), ids.end());
        if (uniq.size() != ids.size())
            throw InputError(name + ": duplicate node ids in attribute file");
    }

    AttributeTable table(ids);
    for (auto& [col, decl] : schema.columns) {
        auto& vals = raw[col];
        if (!decl.categorical) {
            std::vector<double> out;
            out.reserve(vals.size());
            for (size_t r = 0; r < vals.size(); ++r)
                out.push_back(detail::parse_double(
                    vals[r], name + ": column '" + col + "' row " + std::to_string(r + 2)));
            table.add_numeric(col, std::move(out));
            continue;
        }
        CategoricalColumn cat;
        cat.levels = decl.levels;
        if (cat.levels.empty()) {
            std::set<std::string> seen(vals.begin(), vals.end());
            cat.levels.assign(seen.begin(), seen.end());
        }
        if (decl.reference.empty())
            throw SpecError("categorical column '" + col + "' needs a reference level");
        cat.reference_code = cat.code_of(decl.reference);
        if (cat.reference_code < 0)
            throw SpecError("reference level '" + decl.reference +
                            "' is not a level of column '" + col + "'");
        cat.codes.reserve(vals.size());
        for (size_t r = 0; r < vals.size(); ++r) {
            int code = cat.code_of(vals[r]);
            if (code < 0)
                throw InputError(name + ": column '" + col + "' row " +
                                 std::to_string(r + 2) + ": value '" + vals[r] +
                                 "' is not a declared level");
            cat.codes.push_back(code);
        }
        table.add_categorical(col, std::move(cat));
    }
    return table;
}

inline void AttributeTable::write_csv(std::ostream& out) const {
    auto names = column_names();
    out << "id";
    for (auto& c : names) out << ',' << c;
    out << '\n';
    for (size_t r = 0; r < node_ids_.size(); ++r) {
        out << node_ids_[r];
        for (auto& c : names) {
            out << ',';
            auto& var = columns_.at(c);
            if (auto* num = std::get_if<NumericColumn>(&var)) {
                // shortest round-trip formatting so write/read is lossless
                char buf[32];
                auto res = std::to_chars(buf, buf + sizeof(buf), num->values[r]);
                out.write(buf, res.ptr - buf);
            } else {
                auto& cat = std::get<CategoricalColumn>(var);
                out << cat.levels[cat.codes[r]];
            }
        }
        out << '\n';
    }
}

} // namespace ergmlasso
