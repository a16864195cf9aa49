#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        size_t a = field.find_first_not_of(" \t\r");
        size_t b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

// Writes "# schema: <tag>" followed by a header row, then data rows.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& schema,
              const std::vector<std::string>& columns)
        : out_(path) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        out_ << "# schema: " << schema << "\n";
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
        n_cols_ = columns.size();
    }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != n_cols_)
            throw InvalidArgument("CsvWriter: column count mismatch");
        for (size_t i = 0; i < fields.size(); ++i)
            out_ << (i ? "," : "") << fields[i];
        out_ << "\n";
    }

    void close() { out_.close(); }

private:
    std::ofstream out_;
    size_t n_cols_ = 0;
};

struct CsvData {
    std::string schema;                       // empty when absent
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline CsvData read_csv(std::istream& in, const std::string& origin = "<csv>") {
    CsvData data;
    std::string line;
    bool header_seen = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t pos = line.find("schema:");
            if (pos != std::string::npos && data.schema.empty()) {
                std::string tag = line.substr(pos + 7);
                size_t a = tag.find_first_not_of(" \t");
                data.schema = a == std::string::npos ? "" : tag.substr(a);
            }
            continue;
        }
        std::vector<std::string> fields = split_csv_line(line);
        if (!header_seen) {
            data.columns = std::move(fields);
            header_seen = true;
            continue;
        }
        if (fields.size() != data.columns.size())
            throw ParseError(strformat("%s:%zu: expected %zu fields, got %zu",
                                       origin.c_str(), line_no, data.columns.size(),
                                       fields.size()));
        data.rows.push_back(std::move(fields));
    }
    if (!header_seen) throw ParseError(origin + ": no header row");
    return data;
}

inline CsvData read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return read_csv(in, path);
}

namespace detail {

inline double csv_number(const std::string& s, const std::string& origin, size_t row) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(strformat("%s: row %zu: not a number: '%s'",
                                   origin.c_str(), row, s.c_str()));
    }
}

inline size_t csv_column(const CsvData& data, const std::string& name,
                         const std::string& origin) {
    for (size_t i = 0; i < data.columns.size(); ++i)
        if (data.columns[i] == name) return i;
    throw ParseError(origin + ": missing column " + name);
}

inline TimeSeries series_from_columns(const CsvData& data, size_t epoch_col,
                                      size_t value_col, const std::string& origin) {
    if (data.rows.empty()) throw EmptySeries(origin + ": no data rows");
    std::vector<double> epochs, values;
    epochs.reserve(data.rows.size());
    values.reserve(data.rows.size());
    for (size_t r = 0; r < data.rows.size(); ++r) {
        epochs.push_back(csv_number(data.rows[r][epoch_col], origin, r + 1));
        values.push_back(csv_number(data.rows[r][value_col], origin, r + 1));
    }
    for (size_t i = 1; i < epochs.size(); ++i)
        if (epochs[i] <= epochs[i - 1])
            throw ParseError(strformat("%s: epochs not increasing at row %zu",
                                       origin.c_str(), i + 1));
    TimeSeries ts;
    ts.start_epoch = epochs.front();
    if (epochs.size() == 1) {
        ts.period_s = 1.0;
        ts.values = values;
        ts.gap_mask.assign(1, 0);
        return ts;
    }
    double period = epochs[1] - epochs[0];
    for (size_t i = 1; i < epochs.size(); ++i) {
        double d = epochs[i] - epochs[i - 1];
        if (d < period) period = d;
    }
    size_t total = static_cast<size_t>(
                       std::llround((epochs.back() - epochs.front()) / period)) + 1;
    ts.period_s = period;
    ts.values.assign(total, std::numeric_limits<double>::quiet_NaN());
    ts.gap_mask.assign(total, 1);
    for (size_t i = 0; i < epochs.size(); ++i) {
        double slot = (epochs[i] - epochs.front()) / period;
        double nearest = std::round(slot);
        if (std::abs(slot - nearest) > 1e-6)
            throw ParseError(strformat("%s: epoch at row %zu off the %gs grid",
                                       origin.c_str(), i + 1, period));
        size_t idx = static_cast<size_t>(nearest);
        ts.values[idx] = values[i];
        ts.gap_mask[idx] = 0;
    }
    return ts;
}

} // namespace detail

// Reads a series CSV with an epoch_s column and one named value column.
inline TimeSeries read_series_csv(const std::string& path,
                                  const std::string& value_column) {
    CsvData data = read_csv_file(path);
    size_t ec = detail::csv_column(data, "epoch_s", path);
    size_t vc = detail::csv_column(data, value_column, path);
    return detail::series_from_columns(data, ec, vc, path);
}

} // namespace ersm
