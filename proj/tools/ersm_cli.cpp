// Command-line front end: prepare observatory data, train regression models,
// predict the local diurnal variation, and evaluate station pairs.
//
// Exit codes: 0 success, 2 input error, 3 data-coverage error, 4 internal
// invariant violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <ersm/ersm.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct Options {
    std::vector<std::string> ers_path;
    std::vector<std::string> lrs_path;
    std::string kp_path;
    std::string igrf_path;
    std::string core_csv_path;
    std::string model = "linear";
    double cutoff_cph = 0.33;
    double output_cutoff_cph = 1.5;
    std::string start;
    std::string end;
    std::string seed;
    std::string output_dir = ".";
    std::string model_file;
    double spike_threshold_nt = 500.0;
    std::string knn_k_grid;
    std::string knn_alpha_grid;
    int knn_hops = -1;
    int nn_members = 0;
    int nn_blocks = 0;
    int nn_hidden = 0;
    int nn_epochs = 0;
};

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos == s.size() && std::isfinite(v)) return v;
    } catch (...) {
    }
    throw ersm::ParseError(what + ": bad number '" + s + "'");
}

int to_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos == s.size()) return v;
    } catch (...) {
    }
    throw ersm::ParseError(what + ": bad integer '" + s + "'");
}

uint64_t to_seed(const std::string& s) {
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos == s.size()) return static_cast<uint64_t>(v);
    } catch (...) {
    }
    throw ersm::ParseError("seed: bad integer '" + s + "'");
}

// Accepts YYYY-MM-DD (midnight UTC) or a raw epoch in seconds.
double parse_time_bound(const std::string& text, const std::string& what) {
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        bool digits = true;
        for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
            digits = digits && std::isdigit(static_cast<unsigned char>(text[i]));
        if (digits) {
            int y = to_int(text.substr(0, 4), what);
            int m = to_int(text.substr(5, 2), what);
            int d = to_int(text.substr(8, 2), what);
            if (m < 1 || m > 12 || d < 1 || d > 31)
                throw ersm::ParseError(what + ": bad date '" + text + "'");
            return ersm::civil_to_epoch(y, m, d);
        }
    }
    return to_double(text, what);
}

const std::set<std::string>& documented_keys() {
    static const std::set<std::string> keys = {
        "ers_path",       "lrs_path",      "kp_path",
        "igrf_path",      "core_csv_path", "model",
        "cutoff_cph",     "output_cutoff_cph", "start",
        "end",            "seed",          "output_dir",
        "model_file",     "spike_threshold_nt", "knn_k_grid",
        "knn_alpha_grid", "knn_hops",      "nn_members",
        "nn_blocks",      "nn_hidden",     "nn_epochs",
    };
    return keys;
}

void apply_config_value(Options& o, const std::string& key, const std::string& value) {
    if (key == "ers_path") o.ers_path = split_list(value);
    else if (key == "lrs_path") o.lrs_path = split_list(value);
    else if (key == "kp_path") o.kp_path = value;
    else if (key == "igrf_path") o.igrf_path = value;
    else if (key == "core_csv_path") o.core_csv_path = value;
    else if (key == "model") o.model = value;
    else if (key == "cutoff_cph") o.cutoff_cph = to_double(value, key);
    else if (key == "output_cutoff_cph") o.output_cutoff_cph = to_double(value, key);
    else if (key == "start") o.start = value;
    else if (key == "end") o.end = value;
    else if (key == "seed") o.seed = value;
    else if (key == "output_dir") o.output_dir = value;
    else if (key == "model_file") o.model_file = value;
    else if (key == "spike_threshold_nt") o.spike_threshold_nt = to_double(value, key);
    else if (key == "knn_k_grid") o.knn_k_grid = value;
    else if (key == "knn_alpha_grid") o.knn_alpha_grid = value;
    else if (key == "knn_hops") o.knn_hops = to_int(value, key);
    else if (key == "nn_members") o.nn_members = to_int(value, key);
    else if (key == "nn_blocks") o.nn_blocks = to_int(value, key);
    else if (key == "nn_hidden") o.nn_hidden = to_int(value, key);
    else if (key == "nn_epochs") o.nn_epochs = to_int(value, key);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ersm::IoError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ersm::ParseError(ersm::strformat(
                "%s:%d: expected 'key = value'", path.c_str(), lineno));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ersm::ParseError(ersm::strformat(
                "%s:%d: empty config key", path.c_str(), lineno));
        if (!documented_keys().count(key))
            throw ersm::ParseError(ersm::strformat(
                "%s:%d: unknown config key '%s'", path.c_str(), lineno, key.c_str()));
        kv[key] = value;
    }
    return kv;
}

// Flags win over config values: a key is applied only when the matching
// option was not given on the command line.
void overlay_config(const std::string& path, Options& o,
                    const std::map<std::string, CLI::Option*>& flags) {
    for (const auto& [key, value] : parse_config_file(path)) {
        auto it = flags.find(key);
        if (it == flags.end()) continue;
        if (it->second->count() > 0) continue;
        apply_config_value(o, key, value);
    }
}

std::vector<std::string> model_kinds(const std::string& model) {
    if (model == "all") return {"linear", "knn", "nn"};
    if (model == "linear" || model == "knn" || model == "nn") return {model};
    throw ersm::InvalidArgument("model must be linear, knn, nn, or all (got '" +
                                model + "')");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ersm::IoError("cannot create output directory " + dir + ": " +
                            ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string format_epoch(double e) {
    if (e == std::floor(e) && std::abs(e) < 1e15)
        return ersm::strformat("%.0f", e);
    return ersm::strformat("%.6f", e);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ersm::IoError("cannot open for writing: " + path);
    out << j.dump(1) << "\n";
    if (!out) throw ersm::IoError("write failed: " + path);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ersm::IoError("cannot open " + path);
    return in;
}

ersm::KpSeries load_kp(const std::string& path) {
    std::ifstream in = open_input(path);
    ersm::KpSeries kp = ersm::parse_kp(in);
    if (kp.empty()) throw ersm::ParseError(path + ": no Kp records");
    return kp;
}

// Prepared station series: a dv CSV whose comment header carries the station
// metadata, so downstream commands need no second input.
struct PreparedSeries {
    ersm::StationRecord station;
    ersm::TimeSeries dv;
};

void write_prepared(const std::string& path, const ersm::StationRecord& st,
                    const ersm::TimeSeries& dv) {
    std::ofstream out(path);
    if (!out) throw ersm::IoError("cannot open for writing: " + path);
    out << "# schema: ersm-series-v1\n";
    out << "# station: " << st.iaga_code << "\n";
    out << ersm::strformat("# latitude_deg: %.6f\n", st.latitude_deg);
    out << ersm::strformat("# longitude_deg: %.6f\n", st.longitude_deg);
    out << ersm::strformat("# elevation_m: %.3f\n", st.elevation_m);
    out << "epoch_s,dv_nT\n";
    for (size_t i = 0; i < dv.size(); ++i)
        out << format_epoch(dv.epoch_at(i)) << ','
            << ersm::strformat("%.10g", dv.values[i]) << "\n";
    if (!out) throw ersm::IoError("write failed: " + path);
}

PreparedSeries read_prepared(const std::string& path) {
    ersm::CsvData data = ersm::read_csv_file(path);
    if (data.schema != "ersm-series-v1")
        throw ersm::ParseError(path + ": expected schema ersm-series-v1, found '" +
                               data.schema + "'");
    PreparedSeries out;
    size_t ec = ersm::detail::csv_column(data, "epoch_s", path);
    size_t vc = ersm::detail::csv_column(data, "dv_nT", path);
    out.dv = ersm::detail::series_from_columns(data, ec, vc, path);
    for (size_t i = 0; i < out.dv.size(); ++i)
        if (!std::isfinite(out.dv.values[i]))
            throw ersm::ParseError(ersm::strformat(
                "%s: missing sample at epoch %s; prepared series must be a "
                "complete grid", path.c_str(),
                format_epoch(out.dv.epoch_at(i)).c_str()));

    std::ifstream in = open_input(path);
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] != '#') break;
        size_t colon = t.find(':');
        if (colon == std::string::npos) continue;
        meta[trim(t.substr(1, colon - 1))] = trim(t.substr(colon + 1));
    }
    for (const char* key : {"station", "latitude_deg", "longitude_deg", "elevation_m"})
        if (!meta.count(key))
            throw ersm::ParseError(path + ": missing '# " + std::string(key) +
                                   ":' header");
    out.station.iaga_code = meta["station"];
    out.station.latitude_deg = to_double(meta["latitude_deg"], path);
    out.station.longitude_deg = to_double(meta["longitude_deg"], path);
    out.station.elevation_m = to_double(meta["elevation_m"], path);
    return out;
}

ersm::StationRecord rec_from_meta(const ersm::StationMeta& m) {
    ersm::StationRecord r;
    r.iaga_code = m.code;
    r.latitude_deg = m.latitude_deg;
    r.longitude_deg = m.longitude_deg;
    r.elevation_m = m.elevation_m;
    return r;
}

// Applies --start/--end, keeping samples in [start, end).
ersm::TimeSeries bounded(const ersm::TimeSeries& ts, const Options& o) {
    if (o.start.empty() && o.end.empty()) return ts;
    double t0 = o.start.empty() ? ts.start_epoch
                                : parse_time_bound(o.start, "start");
    double t1 = o.end.empty() ? ts.end_epoch() + ts.period_s
                              : parse_time_bound(o.end, "end");
    ersm::TimeSeries out = ts.slice_time(t0, t1);
    if (out.empty())
        throw ersm::EmptySeries(ersm::strformat(
            "no samples in [%s, %s)", format_epoch(t0).c_str(),
            format_epoch(t1).c_str()));
    return out;
}

ersm::KnnSearchConfig knn_config(const Options& o, uint64_t seed) {
    ersm::KnnSearchConfig kc = ersm::KnnSearchConfig::defaults();
    if (!o.knn_k_grid.empty()) {
        kc.k_grid.clear();
        for (const std::string& s : split_list(o.knn_k_grid))
            kc.k_grid.push_back(to_int(s, "knn_k_grid"));
    }
    if (!o.knn_alpha_grid.empty()) {
        kc.alpha_grid.clear();
        for (const std::string& s : split_list(o.knn_alpha_grid))
            kc.alpha_grid.push_back(to_double(s, "knn_alpha_grid"));
    }
    if (o.knn_hops >= 0) kc.basin_hops = o.knn_hops;
    kc.seed = seed;
    kc.output_cutoff_cph = o.output_cutoff_cph;
    return kc;
}

ersm::NnTrainConfig nn_config(const Options& o) {
    ersm::NnTrainConfig nc;
    if (o.nn_members > 0) nc.members = o.nn_members;
    if (o.nn_blocks > 0) nc.blocks = o.nn_blocks;
    if (o.nn_hidden > 0) nc.hidden = o.nn_hidden;
    if (o.nn_epochs > 0) nc.epochs = o.nn_epochs;
    nc.output_cutoff_cph = o.output_cutoff_cph;
    return nc;
}

void require_inputs(const std::vector<std::string>& paths, size_t n,
                    const std::string& flag) {
    if (paths.size() != n)
        throw ersm::InvalidArgument(ersm::strformat(
            "%s: expected %zu path(s), got %zu", flag.c_str(), n, paths.size()));
}

// ---------------------------------------------------------------------------
// prepare

int cmd_prepare(const Options& o) {
    if (o.ers_path.empty() && o.lrs_path.empty())
        throw ersm::InvalidArgument("prepare: no input files (use --ers and/or --lrs)");
    bool has_igrf = !o.igrf_path.empty();
    bool has_core = !o.core_csv_path.empty();
    if (has_igrf == has_core)
        throw ersm::InvalidArgument(
            "prepare: exactly one of --igrf / --core-csv must be set");

    ersm::IgrfModel igrf;
    ersm::TimeSeries core;
    if (has_igrf) {
        std::ifstream in = open_input(o.igrf_path);
        igrf = ersm::load_coefficients(in);
    } else {
        core = ersm::read_series_csv(o.core_csv_path, "core_nT");
    }
    ensure_dir(o.output_dir);

    auto prepare_one = [&](const std::vector<std::string>& files) {
        std::vector<ersm::StationRecord> recs;
        for (const std::string& f : files) {
            std::ifstream in = open_input(f);
            recs.push_back(ersm::parse_iaga2002(in));
        }
        ersm::StationRecord st =
            recs.size() == 1 ? std::move(recs.front()) : ersm::merge_records(recs);
        ersm::TimeSeries total = ersm::scalar_magnitude(st);
        ersm::CleanStats stats;
        ersm::TimeSeries cleaned =
            ersm::clean_series(total, o.spike_threshold_nt, &stats);
        ersm::TimeSeries dv = has_igrf ? ersm::temporal_scalar(cleaned, st, igrf)
                                       : ersm::subtract_core(cleaned, core);

        std::string code = st.iaga_code;
        std::transform(code.begin(), code.end(), code.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        std::string csv_path = join_path(o.output_dir, code + "_dv.csv");
        write_prepared(csv_path, st, dv);

        json side;
        side["schema"] = "ersm-prepare-v1";
        side["station"] = st.iaga_code;
        side["source_files"] = files;
        side["samples"] = dv.size();
        side["start_epoch_s"] = dv.start_epoch;
        side["end_epoch_s"] = dv.end_epoch();
        side["period_s"] = dv.period_s;
        side["spikes_removed"] = stats.spikes_removed;
        side["gaps_filled"] = stats.gaps_filled;
        side["core_source"] = has_igrf ? "igrf" : "core_csv";
        write_json_file(join_path(o.output_dir, code + "_dv.json"), side);

        std::cout << ersm::strformat(
            "prepared %s: %zu samples, %zu spikes removed, %zu gaps filled -> %s\n",
            st.iaga_code.c_str(), dv.size(), stats.spikes_removed,
            stats.gaps_filled, csv_path.c_str());
    };

    if (!o.ers_path.empty()) prepare_one(o.ers_path);
    if (!o.lrs_path.empty()) prepare_one(o.lrs_path);
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const Options& o) {
    require_inputs(o.ers_path, 1, "train: --ers (prepared CSV)");
    require_inputs(o.lrs_path, 1, "train: --lrs (prepared CSV)");
    if (o.kp_path.empty()) throw ersm::InvalidArgument("train: --kp is required");
    std::vector<std::string> kinds = model_kinds(o.model);
    bool stochastic = std::find(kinds.begin(), kinds.end(), "knn") != kinds.end() ||
                      std::find(kinds.begin(), kinds.end(), "nn") != kinds.end();
    if (stochastic && o.seed.empty())
        throw ersm::InvalidArgument(
            "train: --seed is required when the model includes knn or nn");
    uint64_t seed = o.seed.empty() ? 0 : to_seed(o.seed);

    PreparedSeries e = read_prepared(o.ers_path[0]);
    PreparedSeries l = read_prepared(o.lrs_path[0]);
    ersm::KpSeries kp = load_kp(o.kp_path);
    ersm::TimeSeries ers_dv = bounded(e.dv, o);
    ersm::TimeSeries lrs_dv = bounded(l.dv, o);

    ersm::AlignmentResult aligned =
        ersm::align(ers_dv, lrs_dv, e.station, l.station, o.cutoff_cph);
    ersm::FeatureMatrix fm = ersm::build_features(aligned, kp);
    ensure_dir(o.output_dir);

    json manifest;
    manifest["schema"] = "ersm-train-manifest-v1";
    manifest["ers"] = e.station.iaga_code;
    manifest["lrs"] = l.station.iaga_code;
    manifest["cutoff_cph"] = o.cutoff_cph;
    manifest["longitude_offset_s"] = aligned.offset_s;
    manifest["rows"] = fm.rows();
    manifest["span_start_epoch_s"] = aligned.aligned_ers.start_epoch;
    manifest["span_end_epoch_s"] = aligned.aligned_ers.end_epoch();
    if (!o.seed.empty()) manifest["seed"] = seed;

    for (const std::string& kind : kinds) {
        ersm::TrainedModel tm;
        tm.kind = kind;
        tm.ers = ersm::StationMeta::from(e.station);
        tm.lrs = ersm::StationMeta::from(l.station);
        tm.cutoff_cph = o.cutoff_cph;
        json entry;
        if (kind == "linear") {
            tm.linear = ersm::fit_linear(fm);
            entry["scale_a"] = tm.linear.scale_a;
            entry["offset_b"] = tm.linear.offset_b;
        } else if (kind == "knn") {
            ersm::KnnSearchReport report;
            tm.knn = ersm::fit_knn(fm, kp, knn_config(o, seed), &report);
            entry["k"] = tm.knn.k;
            entry["alpha"] = tm.knn.alpha;
            entry["grid_k"] = report.grid_k;
            entry["grid_alpha"] = report.grid_alpha;
            entry["grid_cv_rmse_nT"] = report.grid_cv_rmse;
            entry["refined_cv_rmse_nT"] = report.refined_cv_rmse;
        } else {
            ersm::NnTrainConfig nc = nn_config(o);
            tm.nn = ersm::fit_nn(fm, seed, nc);
            entry["members"] = nc.members;
            entry["blocks"] = nc.blocks;
            entry["hidden"] = nc.hidden;
            entry["epochs"] = nc.epochs;
            entry["learning_rate"] = nc.learning_rate;
        }
        std::string path = join_path(o.output_dir, "model_" + kind + ".json");
        ersm::save_model(path, tm);
        manifest["models"][kind] = entry;
        std::cout << "trained " << kind << " -> " << path << "\n";
    }
    std::string mpath = join_path(o.output_dir, "train_manifest.json");
    write_json_file(mpath, manifest);
    std::cout << "manifest -> " << mpath << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const Options& o) {
    if (o.model_file.empty())
        throw ersm::InvalidArgument("predict: --model-file is required");
    require_inputs(o.ers_path, 1, "predict: --ers (prepared CSV)");
    if (o.kp_path.empty()) throw ersm::InvalidArgument("predict: --kp is required");

    ersm::TrainedModel tm = ersm::load_model(o.model_file);
    PreparedSeries e = read_prepared(o.ers_path[0]);
    if (tm.ers.code != e.station.iaga_code)
        throw ersm::InvalidArgument("predict: model was trained on station " +
                                    tm.ers.code + ", input series is " +
                                    e.station.iaga_code);
    ersm::KpSeries kp = load_kp(o.kp_path);
    ersm::TimeSeries dv = bounded(e.dv, o);

    ersm::TimeSeries combined = ersm::normalize_series(
        dv, rec_from_meta(tm.ers), rec_from_meta(tm.lrs), tm.cutoff_cph);
    ersm::FeatureMatrix fm = ersm::build_features(combined, nullptr, kp);

    ersm::TimeSeries pred;
    if (tm.kind == "linear") pred = ersm::predict_linear(tm.linear, fm);
    else if (tm.kind == "knn") pred = ersm::predict_knn(tm.knn, fm);
    else pred = ersm::predict_nn(tm.nn, fm);

    ensure_dir(o.output_dir);
    std::string path = join_path(o.output_dir, "prediction_" + tm.kind + ".csv");
    ersm::CsvWriter out(path, "ersm-prediction-v1", {"epoch_s", "predicted_dv_nT"});
    for (size_t i = 0; i < pred.size(); ++i)
        out.row({format_epoch(pred.epoch_at(i)),
                 ersm::strformat("%.10g", pred.values[i])});
    out.close();
    std::cout << ersm::strformat("wrote %zu predictions -> %s\n", pred.size(),
                                 path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

std::vector<uint8_t> day_availability(const ersm::TimeSeries& a,
                                      const ersm::TimeSeries& b, double start,
                                      double end) {
    const double day_s = 86400.0;
    double day0 = std::ceil(start / day_s - 1e-9) * day_s;
    long n_days = static_cast<long>(std::floor((end - day0) / day_s + 1e-9));
    std::vector<uint8_t> mask;
    auto has_samples = [&](const ersm::TimeSeries& ts, double day) {
        double rel = (day - ts.start_epoch) / ts.period_s;
        long i0 = std::max(0L, static_cast<long>(std::ceil(rel - 1e-9)));
        return i0 < static_cast<long>(ts.size()) &&
               ts.epoch_at(static_cast<size_t>(i0)) < day + day_s;
    };
    for (long d = 0; d < n_days; ++d) {
        double day = day0 + static_cast<double>(d) * day_s;
        mask.push_back(has_samples(a, day) && has_samples(b, day) ? 1 : 0);
    }
    return mask;
}

int cmd_evaluate(const Options& o) {
    require_inputs(o.ers_path, 1, "evaluate: --ers (prepared CSV)");
    require_inputs(o.lrs_path, 1, "evaluate: --lrs (prepared CSV)");
    if (o.kp_path.empty())
        throw ersm::InvalidArgument("evaluate: --kp is required");
    std::vector<std::string> kinds = model_kinds(o.model);

    PreparedSeries e = read_prepared(o.ers_path[0]);
    PreparedSeries l = read_prepared(o.lrs_path[0]);
    ersm::KpSeries kp = load_kp(o.kp_path);

    double t0 = o.start.empty()
                    ? std::max(e.dv.start_epoch, l.dv.start_epoch)
                    : parse_time_bound(o.start, "start");
    double t1 = o.end.empty()
                    ? std::min(e.dv.end_epoch(), l.dv.end_epoch()) + e.dv.period_s
                    : parse_time_bound(o.end, "end");
    std::vector<uint8_t> mask = day_availability(e.dv, l.dv, t0, t1);
    ersm::BlockSchedule schedule = ersm::make_schedule(t0, t1, &mask);

    ersm::EvalOptions opts;
    opts.models = kinds;
    opts.cutoff_cph = o.cutoff_cph;
    opts.output_cutoff_cph = o.output_cutoff_cph;
    opts.seed = o.seed.empty() ? 0 : to_seed(o.seed);
    opts.knn = knn_config(o, 0);
    opts.nn = nn_config(o);

    ersm::EvalReport report =
        ersm::evaluate_pair(e.station, e.dv, l.station, l.dv, kp, schedule, opts);
    for (const std::string& f : report.failures)
        std::cerr << "warning: " << f << "\n";
    if (report.rows.empty())
        throw ersm::NoValidationData("evaluate: no block produced any scores");

    ensure_dir(o.output_dir);
    std::string rows_path = join_path(o.output_dir, "evaluation_rows.csv");
    {
        ersm::CsvWriter w(rows_path, "ersm-eval-rows-v1",
                          {"date", "block", "model", "stratum", "rmse_nT", "samples"});
        for (const ersm::DayScore& r : report.rows)
            w.row({r.date, std::to_string(r.block), r.model, r.stratum,
                   ersm::strformat("%.6f", r.rmse_nT), std::to_string(r.samples)});
    }
    {
        ersm::CsvWriter w(join_path(o.output_dir, "plot_daily_rmse.csv"),
                          "ersm-plot-daily-v1", {"date", "block", "model", "rmse_nT"});
        for (const ersm::DayScore& r : report.rows)
            if (r.stratum == "all")
                w.row({r.date, std::to_string(r.block), r.model,
                       ersm::strformat("%.6f", r.rmse_nT)});
    }
    {
        ersm::CsvWriter w(join_path(o.output_dir, "plot_cdf.csv"),
                          "ersm-plot-cdf-v1", {"model", "rmse_nT", "cumulative"});
        for (const std::string& kind : kinds) {
            std::vector<double> daily;
            for (const ersm::DayScore& r : report.rows)
                if (r.model == kind && r.stratum == "all")
                    daily.push_back(r.rmse_nT);
            std::sort(daily.begin(), daily.end());
            for (size_t i = 0; i < daily.size(); ++i)
                w.row({kind, ersm::strformat("%.6f", daily[i]),
                       ersm::strformat("%.6f", static_cast<double>(i + 1) /
                                                   static_cast<double>(daily.size()))});
        }
    }
    {
        std::vector<std::string> cols = {"epoch_s", "truth_nT"};
        for (const std::string& kind : kinds) cols.push_back(kind + "_nT");
        ersm::CsvWriter w(join_path(o.output_dir, "plot_trace.csv"),
                          "ersm-plot-trace-v1", cols);
        for (const ersm::TracePoint& tp : report.trace) {
            std::vector<std::string> row = {format_epoch(tp.epoch_s),
                                            ersm::strformat("%.6f", tp.truth)};
            for (const std::string& kind : kinds) {
                auto it = tp.pred.find(kind);
                row.push_back(it == tp.pred.end()
                                  ? ""
                                  : ersm::strformat("%.6f", it->second));
            }
            w.row(row);
        }
    }

    json summary;
    summary["schema"] = "ersm-eval-summary-v1";
    summary["ers"] = report.ers_code;
    summary["lrs"] = report.lrs_code;
    summary["separation_km"] = report.separation_km;
    summary["blocks"] = schedule.blocks.size();
    summary["failed_blocks"] = report.failed_blocks;
    summary["failures"] = report.failures;
    summary["models"] = json::array();
    for (const ersm::ModelSummary& m : report.summaries) {
        json entry;
        entry["model"] = m.model;
        entry["days"] = m.days;
        entry["median_rmse_nT"] = m.median;
        entry["q1_rmse_nT"] = m.q1;
        entry["q3_rmse_nT"] = m.q3;
        summary["models"].push_back(entry);
    }
    write_json_file(join_path(o.output_dir, "evaluation_summary.json"), summary);

    for (const ersm::ModelSummary& m : report.summaries)
        std::cout << ersm::strformat(
            "%s: median daily RMSE %.3f nT (q1 %.3f, q3 %.3f) over %zu days\n",
            m.model.c_str(), m.median, m.q1, m.q3, m.days);
    std::cout << ersm::strformat("%zu blocks evaluated, %zu failed -> %s\n",
                                 schedule.blocks.size() - report.failed_blocks.size(),
                                 report.failed_blocks.size(), rows_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------

int exit_code_for(const ersm::Error& e) {
    if (dynamic_cast<const ersm::ParseError*>(&e) ||
        dynamic_cast<const ersm::IoError*>(&e) ||
        dynamic_cast<const ersm::InvalidArgument*>(&e) ||
        dynamic_cast<const ersm::InvalidCutoff*>(&e) ||
        dynamic_cast<const ersm::Misaligned*>(&e))
        return 2;
    if (dynamic_cast<const ersm::SpanTooShort*>(&e) ||
        dynamic_cast<const ersm::NoOverlap*>(&e) ||
        dynamic_cast<const ersm::OutOfRange*>(&e) ||
        dynamic_cast<const ersm::EmptySeries*>(&e) ||
        dynamic_cast<const ersm::TooShort*>(&e) ||
        dynamic_cast<const ersm::InvalidShift*>(&e) ||
        dynamic_cast<const ersm::NoValidationData*>(&e) ||
        dynamic_cast<const ersm::DegenerateFit*>(&e) ||
        dynamic_cast<const ersm::DegenerateSignal*>(&e) ||
        dynamic_cast<const ersm::TrainingDiverged*>(&e))
        return 3;
    return 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-station model for local geomagnetic diurnal variation"};
    app.require_subcommand(1);

    Options o;
    std::string config_path;
    std::map<CLI::App*, std::map<std::string, CLI::Option*>> flags;

    auto add = [&](CLI::App* cmd, const std::string& key, CLI::Option* opt) {
        flags[cmd][key] = opt;
    };
    auto add_io = [&](CLI::App* cmd, bool raw_inputs) {
        const char* ers_help = raw_inputs ? "ERS IAGA-2002 file(s)"
                                          : "ERS prepared series CSV";
        const char* lrs_help = raw_inputs ? "LRS IAGA-2002 file(s)"
                                          : "LRS prepared series CSV";
        add(cmd, "ers_path", cmd->add_option("--ers", o.ers_path, ers_help));
        add(cmd, "lrs_path", cmd->add_option("--lrs", o.lrs_path, lrs_help));
        add(cmd, "output_dir", cmd->add_option("--out", o.output_dir, "output directory"));
        cmd->add_option("--config", config_path, "flat key-value config file");
    };
    auto add_kp = [&](CLI::App* cmd) {
        add(cmd, "kp_path", cmd->add_option("--kp", o.kp_path, "Kp index listing"));
    };
    auto add_span = [&](CLI::App* cmd) {
        add(cmd, "start", cmd->add_option("--start", o.start,
                                          "span start (YYYY-MM-DD or epoch seconds)"));
        add(cmd, "end", cmd->add_option("--end", o.end,
                                        "span end, exclusive (YYYY-MM-DD or epoch seconds)"));
    };
    auto add_training = [&](CLI::App* cmd) {
        add(cmd, "model", cmd->add_option("--model", o.model,
                                          "linear, knn, nn, or all"));
        add(cmd, "cutoff_cph", cmd->add_option("--cutoff-cph", o.cutoff_cph,
                                               "low/high split cutoff (cycles per hour)"));
        add(cmd, "output_cutoff_cph",
            cmd->add_option("--output-cutoff-cph", o.output_cutoff_cph,
                            "low-pass cutoff applied to knn/nn outputs"));
        add(cmd, "seed", cmd->add_option("--seed", o.seed, "RNG seed"));
        add(cmd, "knn_k_grid", cmd->add_option("--knn-k-grid", o.knn_k_grid,
                                               "comma-separated k candidates"));
        add(cmd, "knn_alpha_grid",
            cmd->add_option("--knn-alpha-grid", o.knn_alpha_grid,
                            "comma-separated alpha candidates"));
        add(cmd, "knn_hops", cmd->add_option("--knn-hops", o.knn_hops,
                                             "basin hops for alpha refinement"));
        add(cmd, "nn_members", cmd->add_option("--nn-members", o.nn_members,
                                               "ensemble size"));
        add(cmd, "nn_blocks", cmd->add_option("--nn-blocks", o.nn_blocks,
                                              "residual blocks per member"));
        add(cmd, "nn_hidden", cmd->add_option("--nn-hidden", o.nn_hidden,
                                              "hidden width per block"));
        add(cmd, "nn_epochs", cmd->add_option("--nn-epochs", o.nn_epochs,
                                              "training epochs"));
    };

    CLI::App* prepare = app.add_subcommand(
        "prepare", "clean raw observatory data and subtract the core field");
    add_io(prepare, true);
    add(prepare, "igrf_path",
        prepare->add_option("--igrf", o.igrf_path, "core-field coefficient file"));
    add(prepare, "core_csv_path",
        prepare->add_option("--core-csv", o.core_csv_path,
                            "externally computed core magnitude CSV"));
    add(prepare, "spike_threshold_nt",
        prepare->add_option("--spike-threshold-nt", o.spike_threshold_nt,
                            "despike threshold against the rolling median"));

    CLI::App* train = app.add_subcommand(
        "train", "fit regression models on a prepared station pair");
    add_io(train, false);
    add_kp(train);
    add_span(train);
    add_training(train);

    CLI::App* predict = app.add_subcommand(
        "predict", "predict the local variation from a prepared ERS series");
    add_io(predict, false);
    add_kp(predict);
    add_span(predict);
    add(predict, "model_file",
        predict->add_option("--model-file", o.model_file, "trained model file"));

    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "run the blocked train/eval protocol on a station pair");
    add_io(evaluate, false);
    add_kp(evaluate);
    add_span(evaluate);
    add_training(evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    try {
        if (!config_path.empty()) overlay_config(config_path, o, flags[cmd]);
        if (cmd == prepare) return cmd_prepare(o);
        if (cmd == train) return cmd_train(o);
        if (cmd == predict) return cmd_predict(o);
        return cmd_evaluate(o);
    } catch (const ersm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
