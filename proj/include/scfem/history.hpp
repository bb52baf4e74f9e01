#pragma once

// Run history: one row per adaptive event (initial estimate and
// parametric enrichments, FE sweeps, outer iterations), serialized as
// CSV with full floating-point precision. Optional fields stay blank so
// the column layout never changes.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfem {

struct HistoryRow {
    std::string phase;        // "enrich" | "fe_sweep" | "outer"
    int outer = 0;
    int sweep = -1;           // blank unless an FE sweep
    int n_indices = 0;
    long long n_points = 0;
    long long total_dofs = 0;
    double param_est = 0.0;
    double fe_est = -1.0;     // blank when negative (collocation-only runs)
    double total_est = 0.0;
    std::string selected;     // enriched index, blank otherwise
    double elapsed_sec = -1.0;  // blank unless timing was requested
};

struct History {
    std::vector<HistoryRow> rows;
};

inline const char* history_csv_header() {
    return "phase,outer,sweep,n_indices,n_points,total_dofs,param_est,fe_est,total_est,selected,elapsed_sec";
}

namespace detail {

inline std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Multi-index strings contain commas; swap them for semicolons inside the
// CSV so every row splits into exactly eleven fields.
inline std::string csv_safe(std::string s, char from, char to) {
    for (char& c : s)
        if (c == from) c = to;
    return s;
}

}  // namespace detail

inline void write_history_csv(std::ostream& os, const History& h) {
    os << history_csv_header() << "\n";
    for (const auto& r : h.rows) {
        os << r.phase << ',' << r.outer << ',';
        if (r.sweep >= 0) os << r.sweep;
        os << ',' << r.n_indices << ',' << r.n_points << ',' << r.total_dofs << ','
           << detail::full_precision(r.param_est) << ',';
        if (r.fe_est >= 0.0) os << detail::full_precision(r.fe_est);
        os << ',' << detail::full_precision(r.total_est) << ','
           << detail::csv_safe(r.selected, ',', ';') << ',';
        if (r.elapsed_sec >= 0.0) os << detail::full_precision(r.elapsed_sec);
        os << "\n";
    }
}

inline History read_history_csv(std::istream& is) {
    History h;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("history: empty file");
    if (line != history_csv_header())
        throw std::runtime_error("history: unexpected header '" + line + "'");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        f.push_back(cur);
        if (f.size() != 11) throw std::runtime_error("history: malformed row '" + line + "'");
        HistoryRow r;
        r.phase = f[0];
        r.outer = std::stoi(f[1]);
        r.sweep = f[2].empty() ? -1 : std::stoi(f[2]);
        r.n_indices = std::stoi(f[3]);
        r.n_points = std::stoll(f[4]);
        r.total_dofs = std::stoll(f[5]);
        r.param_est = std::stod(f[6]);
        r.fe_est = f[7].empty() ? -1.0 : std::stod(f[7]);
        r.total_est = std::stod(f[8]);
        r.selected = detail::csv_safe(f[9], ';', ',');
        r.elapsed_sec = f[10].empty() ? -1.0 : std::stod(f[10]);
        h.rows.push_back(std::move(r));
    }
    return h;
}

}  // namespace scfem
