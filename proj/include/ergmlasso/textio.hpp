#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "ergmlasso/errors.hpp"

namespace ergmlasso {

// Shortest round-trip decimal representation. All numeric file output goes
// through here so reruns with the same seed are byte-identical.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_long(long v) { return std::to_string(v); }

// Minimal CSV emitter: fields are written verbatim, so callers must not pass
// values containing commas or newlines (labels are generated, not free text).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void row(const std::vector<std::string>& fields) {
        for (size_t k = 0; k < fields.size(); ++k) {
            if (k) out_ << ',';
            out_ << fields[k];
        }
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

} // namespace ergmlasso
