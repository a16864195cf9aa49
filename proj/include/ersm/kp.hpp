#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"
#include "ersm/time.hpp"

namespace ersm {

struct KpEntry {
    double epoch_s;
    double kp;
};

struct KpSeries {
    std::vector<KpEntry> entries;

    bool empty() const { return entries.empty(); }
    size_t size() const { return entries.size(); }
    double first_epoch() const { return entries.front().epoch_s; }
    double last_epoch() const { return entries.back().epoch_s; }
};

// GFZ Kp ASCII export: '#' comment lines, then one record per 3-hour
// interval. Columns: year month day start_hour mid_hour days days_m Kp ap ...
// (Kp is the 8th column).
inline KpSeries parse_kp(std::istream& in) {
    KpSeries out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        if (line[b] == '#') continue;
        std::istringstream iss(line);
        std::vector<std::string> toks;
        std::string tok;
        while (iss >> tok) toks.push_back(tok);
        if (toks.size() < 8)
            throw ParseError(strformat("kp line %d: expected >= 8 columns, got %zu",
                                       lineno, toks.size()));
        int y, mo, d;
        double hh, kp;
        try {
            y = std::stoi(toks[0]);
            mo = std::stoi(toks[1]);
            d = std::stoi(toks[2]);
            hh = std::stod(toks[3]);
            kp = std::stod(toks[7]);
        } catch (...) {
            throw ParseError(strformat("kp line %d: unparseable record", lineno));
        }
        if (kp < 0.0 || kp > 9.0)
            throw ParseError(strformat("kp line %d: Kp %.3f outside [0, 9]",
                                       lineno, kp));
        double epoch = civil_to_epoch(y, mo, d) + hh * 3600.0;
        if (!out.entries.empty() && epoch <= out.entries.back().epoch_s)
            throw ParseError(strformat("kp line %d: non-increasing epoch", lineno));
        out.entries.push_back({epoch, kp});
    }
    return out;
}

inline KpSeries parse_kp(const std::string& text) {
    std::istringstream iss(text);
    return parse_kp(iss);
}

// Zero-order hold: value of the latest entry with epoch <= epoch_s.
inline double kp_at(const KpSeries& kp, double epoch_s) {
    if (kp.empty() || epoch_s < kp.entries.front().epoch_s)
        throw OutOfRange(strformat("kp_at: %.1f precedes first Kp entry", epoch_s));
    size_t lo = 0, hi = kp.entries.size();
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        if (kp.entries[mid].epoch_s <= epoch_s) lo = mid;
        else hi = mid;
    }
    return kp.entries[lo].kp;
}

} // namespace ersm
