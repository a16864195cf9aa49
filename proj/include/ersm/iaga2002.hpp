#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"
#include "ersm/station.hpp"
#include "ersm/time.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {
namespace iaga {

inline bool is_sentinel(double v) {
    return v >= 88887.99;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool valid_reported(const std::string& rep) {
    if (rep.size() < 3 || rep.size() > 4) return false;
    std::string base = rep.substr(0, 3);
    if (base != "XYZ" && base != "HDZ") return false;
    if (rep.size() == 4) {
        char f = rep[3];
        if (f != 'F' && f != 'G' && f != 'S') return false;
    }
    return true;
}

struct RawRow {
    double epoch;
    double vals[4];
};

} // namespace iaga

// Parse one IAGA-2002 stream: keyword headers (24-char keyword field, line
// ends with '|'), optional " #" comment lines, a DATE data header, then
// whitespace-separated data rows. Sentinels 99999.xx / 88888.xx become gaps.
inline StationRecord parse_iaga2002(std::istream& in) {
    StationRecord rec;
    std::string line;
    int lineno = 0;
    bool have_lat = false, have_lon = false, have_code = false, have_rep = false;
    int ncols = 0;

    auto header_value = [](const std::string& l) {
        // keyword occupies the first 24 columns; value runs to the final '|'
        std::string body = l;
        size_t bar = body.find_last_of('|');
        if (bar != std::string::npos) body = body.substr(0, bar);
        if (body.size() > 24) return iaga::trim(body.substr(24));
        return std::string();
    };

    // headers
    while (std::getline(in, line)) {
        ++lineno;
        if (iaga::trim(line).empty()) continue;
        std::string t = iaga::trim(line);
        if (t[0] == '#') continue;  // comment
        if (t.rfind("DATE", 0) == 0) {
            auto toks = iaga::split_ws(t);
            // DATE TIME DOY <chan...> |
            for (auto& tok : toks)
                if (tok != "DATE" && tok != "TIME" && tok != "DOY" && tok != "|")
                    ++ncols;
            break;
        }
        if (line.find('|') == std::string::npos)
            throw ParseError(strformat("iaga2002 line %d: header without '|'", lineno));
        std::string val = header_value(line);
        if (t.rfind("IAGA CODE", 0) == 0 || t.rfind("IAGA Code", 0) == 0) {
            rec.iaga_code = val;
            have_code = true;
        } else if (t.rfind("Geodetic Latitude", 0) == 0) {
            try { rec.latitude_deg = std::stod(val); } catch (...) {
                throw ParseError(strformat("iaga2002 line %d: bad latitude '%s'",
                                           lineno, val.c_str()));
            }
            have_lat = true;
        } else if (t.rfind("Geodetic Longitude", 0) == 0) {
            try { rec.longitude_deg = wrap_longitude(std::stod(val)); } catch (...) {
                throw ParseError(strformat("iaga2002 line %d: bad longitude '%s'",
                                           lineno, val.c_str()));
            }
            have_lon = true;
        } else if (t.rfind("Elevation", 0) == 0) {
            try { rec.elevation_m = std::stod(val); } catch (...) {
                rec.elevation_m = 0.0;
            }
        } else if (t.rfind("Reported", 0) == 0) {
            rec.reported = val;
            have_rep = true;
        }
    }

    if (!have_code)
        throw ParseError("iaga2002: missing IAGA CODE header");
    if (!have_lat || !have_lon)
        throw ParseError("iaga2002: missing geodetic coordinates");
    if (!have_rep)
        throw ParseError("iaga2002: missing Reported header");
    if (!iaga::valid_reported(rec.reported))
        throw ParseError("iaga2002: unknown Reported orientation '" + rec.reported + "'");
    if (ncols == 0)
        throw ParseError("iaga2002: missing DATE data header");
    int nch = static_cast<int>(rec.reported.size());
    if (ncols < nch)
        throw ParseError(strformat(
            "iaga2002: data header has %d channels, Reported names %d", ncols, nch));

    // data rows
    std::vector<iaga::RawRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = iaga::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto toks = iaga::split_ws(t);
        if (static_cast<int>(toks.size()) < 3 + nch)
            throw ParseError(strformat("iaga2002 line %d: short data row", lineno));
        int y, mo, d, h, mi;
        double sec;
        if (std::sscanf(toks[0].c_str(), "%d-%d-%d", &y, &mo, &d) != 3)
            throw ParseError(strformat("iaga2002 line %d: bad date '%s'",
                                       lineno, toks[0].c_str()));
        if (std::sscanf(toks[1].c_str(), "%d:%d:%lf", &h, &mi, &sec) != 3)
            throw ParseError(strformat("iaga2002 line %d: bad time '%s'",
                                       lineno, toks[1].c_str()));
        iaga::RawRow row{};
        row.epoch = civil_to_epoch(y, mo, d, h, mi, sec);
        if (!rows.empty() && row.epoch <= rows.back().epoch)
            throw ParseError(strformat(
                "iaga2002 line %d: non-monotonic timestamp", lineno));
        for (int c = 0; c < nch; ++c) {
            try { row.vals[c] = std::stod(toks[3 + c]); } catch (...) {
                throw ParseError(strformat("iaga2002 line %d: bad value '%s'",
                                           lineno, toks[3 + c].c_str()));
            }
        }
        rows.push_back(row);
    }
    if (rows.empty())
        throw ParseError("iaga2002: no data rows");

    // cadence: smallest positive delta; every delta must be a multiple of it
    double period = 0.0;
    for (size_t i = 1; i < rows.size(); ++i) {
        double dt = rows[i].epoch - rows[i - 1].epoch;
        if (period == 0.0 || dt < period) period = dt;
    }
    if (period == 0.0) period = 60.0;  // single row
    size_t total = static_cast<size_t>(
        std::round((rows.back().epoch - rows.front().epoch) / period)) + 1;
    for (size_t i = 1; i < rows.size(); ++i) {
        double steps = (rows[i].epoch - rows.front().epoch) / period;
        if (std::abs(steps - std::round(steps)) > 1e-6)
            throw ParseError("iaga2002: irregular sampling interval");
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int c = 0; c < nch; ++c) {
        TimeSeries ts;
        ts.start_epoch = rows.front().epoch;
        ts.period_s = period;
        ts.values.assign(total, nan);
        ts.gap_mask.assign(total, 1);
        for (const auto& row : rows) {
            size_t idx = static_cast<size_t>(
                std::round((row.epoch - rows.front().epoch) / period));
            if (iaga::is_sentinel(row.vals[c])) continue;
            ts.values[idx] = row.vals[c];
            ts.gap_mask[idx] = 0;
        }
        rec.components[std::string(1, rec.reported[c])] = std::move(ts);
    }
    return rec;
}

inline StationRecord parse_iaga2002(const std::string& text) {
    std::istringstream iss(text);
    return parse_iaga2002(iss);
}

// Serialize in IAGA-2002 layout; gap samples become the 99999 sentinel.
inline void write_iaga2002(std::ostream& out, const StationRecord& rec) {
    auto hdr = [&](const std::string& key, const std::string& val) {
        std::string k = " " + key;
        k.resize(24, ' ');
        std::string body = k + val;
        if (body.size() < 69) body.resize(69, ' ');
        out << body << " |\n";
    };
    hdr("Format", "IAGA-2002");
    hdr("IAGA CODE", rec.iaga_code);
    hdr("Geodetic Latitude", strformat("%.3f", rec.latitude_deg));
    hdr("Geodetic Longitude", strformat("%.3f", rec.longitude_deg));
    hdr("Elevation", strformat("%.0f", rec.elevation_m));
    hdr("Reported", rec.reported);

    std::string head = "DATE       TIME         DOY   ";
    for (char ch : rec.reported)
        head += strformat("  %s%c     ", rec.iaga_code.c_str(), ch);
    if (head.size() < 69) head.resize(69, ' ');
    out << head << " |\n";

    const TimeSeries& first = rec.components.at(std::string(1, rec.reported[0]));
    for (size_t i = 0; i < first.size(); ++i) {
        double epoch = first.epoch_at(i);
        CivilTime ct = epoch_to_civil(epoch);
        out << strformat("%04d-%02d-%02d %02d:%02d:%06.3f %03d ",
                         ct.year, ct.month, ct.day, ct.hour, ct.minute,
                         ct.second, day_of_year(ct.year, ct.month, ct.day));
        for (char ch : rec.reported) {
            const TimeSeries& ts = rec.components.at(std::string(1, ch));
            double v = (ts.is_gap(i) || std::isnan(ts.values[i])) ? 99999.00
                                                                  : ts.values[i];
            out << strformat("%10.2f", v);
        }
        out << "\n";
    }
}

// Concatenate per-day records of the same station into one record; days
// missing between files become gap runs.
inline StationRecord merge_records(std::vector<StationRecord> recs) {
    if (recs.empty()) throw InvalidArgument("merge_records: no records");
    std::sort(recs.begin(), recs.end(),
              [](const StationRecord& a, const StationRecord& b) {
                  return a.components.begin()->second.start_epoch <
                         b.components.begin()->second.start_epoch;
              });
    StationRecord out = recs.front();
    for (size_t r = 1; r < recs.size(); ++r) {
        const StationRecord& nxt = recs[r];
        if (nxt.iaga_code != out.iaga_code)
            throw InvalidArgument("merge_records: station codes differ (" +
                                  out.iaga_code + " vs " + nxt.iaga_code + ")");
        if (nxt.reported != out.reported)
            throw InvalidArgument("merge_records: Reported orientation differs");
        for (auto& [name, dst] : out.components) {
            const TimeSeries& src = nxt.component(name);
            if (std::abs(src.period_s - dst.period_s) > 1e-9)
                throw InvalidArgument("merge_records: cadence differs");
            double gap_steps =
                (src.start_epoch - dst.end_epoch()) / dst.period_s - 1.0;
            if (gap_steps < -1e-6)
                throw InvalidArgument("merge_records: overlapping records");
            size_t fill = static_cast<size_t>(std::round(std::max(0.0, gap_steps)));
            const double nan = std::numeric_limits<double>::quiet_NaN();
            dst.values.insert(dst.values.end(), fill, nan);
            dst.gap_mask.insert(dst.gap_mask.end(), fill, 1);
            dst.values.insert(dst.values.end(), src.values.begin(), src.values.end());
            dst.gap_mask.insert(dst.gap_mask.end(), src.gap_mask.begin(),
                                src.gap_mask.end());
        }
    }
    return out;
}

// Scalar field magnitude: F channel when reported, else sqrt of the component
// sum of squares (XYZ) or sqrt(H^2 + Z^2) for HDZ records.
inline TimeSeries scalar_magnitude(const StationRecord& rec) {
    if (rec.has_component("F")) return rec.component("F");
    const bool xyz = rec.reported.rfind("XYZ", 0) == 0;
    const TimeSeries& a = rec.component(xyz ? "X" : "H");
    const TimeSeries& z = rec.component("Z");
    TimeSeries out = a;
    const TimeSeries* y = (xyz && rec.has_component("Y")) ? &rec.component("Y") : nullptr;
    for (size_t i = 0; i < out.size(); ++i) {
        bool gap = a.is_gap(i) || z.is_gap(i) || (y && y->is_gap(i));
        if (gap) {
            out.values[i] = std::numeric_limits<double>::quiet_NaN();
            out.gap_mask[i] = 1;
            continue;
        }
        double s = a.values[i] * a.values[i] + z.values[i] * z.values[i];
        if (y) s += y->values[i] * y->values[i];
        out.values[i] = std::sqrt(s);
        out.gap_mask[i] = 0;
    }
    return out;
}

} // namespace ersm
