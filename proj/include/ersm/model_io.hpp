#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ersm/errors.hpp"
#include "ersm/knn.hpp"
#include "ersm/linear.hpp"
#include "ersm/neural.hpp"
#include "ersm/station.hpp"

namespace ersm {

struct StationMeta {
    std::string code;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double elevation_m = 0.0;

    static StationMeta from(const StationRecord& rec) {
        return {rec.iaga_code, rec.latitude_deg, rec.longitude_deg,
                rec.elevation_m};
    }
};

// Self-describing serialized regressor: model kind plus everything needed to
// predict, including the station pair the alignment was computed for.
struct TrainedModel {
    std::string kind;  // "linear" | "knn" | "nn"
    StationMeta ers;
    StationMeta lrs;
    double cutoff_cph = 0.33;
    LinearModel linear;
    KnnModel knn;
    NnEnsemble nn;
};

namespace detail {

inline nlohmann::json station_to_json(const StationMeta& s) {
    return {{"code", s.code},
            {"latitude_deg", s.latitude_deg},
            {"longitude_deg", s.longitude_deg},
            {"elevation_m", s.elevation_m}};
}

inline StationMeta station_from_json(const nlohmann::json& j) {
    StationMeta s;
    s.code = j.at("code").get<std::string>();
    s.latitude_deg = j.at("latitude_deg").get<double>();
    s.longitude_deg = j.at("longitude_deg").get<double>();
    s.elevation_m = j.at("elevation_m").get<double>();
    return s;
}

} // namespace detail

inline void save_model(std::ostream& out, const TrainedModel& model) {
    nlohmann::json j;
    j["schema"] = "ersm-model-v1";
    j["kind"] = model.kind;
    j["ers"] = detail::station_to_json(model.ers);
    j["lrs"] = detail::station_to_json(model.lrs);
    j["cutoff_cph"] = model.cutoff_cph;
    if (model.kind == "linear") {
        j["linear"] = {{"scale_a", model.linear.scale_a},
                       {"offset_b", model.linear.offset_b}};
    } else if (model.kind == "knn") {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : model.knn.train_points)
            pts.push_back({p[0], p[1], p[2]});
        j["knn"] = {{"k", model.knn.k},
                    {"alpha", model.knn.alpha},
                    {"output_cutoff_cph", model.knn.output_cutoff_cph},
                    {"tod_quantiles", model.knn.tod_map.quantiles},
                    {"deriv_quantiles", model.knn.deriv_map.quantiles},
                    {"mag_quantiles", model.knn.mag_map.quantiles},
                    {"train_points", pts},
                    {"train_targets", model.knn.train_targets}};
    } else if (model.kind == "nn") {
        nlohmann::json members = nlohmann::json::array();
        for (const auto& m : model.nn.members)
            members.push_back({{"blocks", m.blocks()},
                               {"hidden", m.hidden()},
                               {"params", m.params},
                               {"running_mean", m.running_mean},
                               {"running_var", m.running_var}});
        j["nn"] = {{"output_cutoff_cph", model.nn.output_cutoff_cph},
                   {"standardizer_mean", model.nn.standardizer.mean},
                   {"standardizer_stdev", model.nn.standardizer.stdev},
                   {"members", members}};
    } else {
        throw InvalidArgument("save_model: unknown model kind '" + model.kind + "'");
    }
    out << j.dump(1) << "\n";
}

inline void save_model(const std::string& path, const TrainedModel& model) {
    std::ofstream f(path);
    if (!f) throw IoError("save_model: cannot write " + path);
    save_model(f, model);
}

inline TrainedModel load_model(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("load_model: bad JSON: ") + e.what());
    }
    try {
        if (j.at("schema").get<std::string>() != "ersm-model-v1")
            throw ParseError("load_model: unsupported schema");
        TrainedModel model;
        model.kind = j.at("kind").get<std::string>();
        model.ers = detail::station_from_json(j.at("ers"));
        model.lrs = detail::station_from_json(j.at("lrs"));
        model.cutoff_cph = j.at("cutoff_cph").get<double>();
        if (model.kind == "linear") {
            model.linear.scale_a = j.at("linear").at("scale_a").get<double>();
            model.linear.offset_b = j.at("linear").at("offset_b").get<double>();
        } else if (model.kind == "knn") {
            const auto& k = j.at("knn");
            model.knn.k = k.at("k").get<int>();
            model.knn.alpha = k.at("alpha").get<double>();
            model.knn.output_cutoff_cph = k.at("output_cutoff_cph").get<double>();
            model.knn.tod_map.quantiles =
                k.at("tod_quantiles").get<std::vector<double>>();
            model.knn.deriv_map.quantiles =
                k.at("deriv_quantiles").get<std::vector<double>>();
            model.knn.mag_map.quantiles =
                k.at("mag_quantiles").get<std::vector<double>>();
            for (const auto& p : k.at("train_points"))
                model.knn.train_points.push_back(
                    {p.at(0).get<double>(), p.at(1).get<double>(),
                     p.at(2).get<double>()});
            model.knn.train_targets =
                k.at("train_targets").get<std::vector<double>>();
        } else if (model.kind == "nn") {
            const auto& nj = j.at("nn");
            model.nn.output_cutoff_cph = nj.at("output_cutoff_cph").get<double>();
            model.nn.standardizer.mean =
                nj.at("standardizer_mean").get<std::vector<double>>();
            model.nn.standardizer.stdev =
                nj.at("standardizer_stdev").get<std::vector<double>>();
            for (const auto& mj : nj.at("members")) {
                NnMember m(mj.at("blocks").get<int>(), mj.at("hidden").get<int>());
                m.params = mj.at("params").get<std::vector<double>>();
                m.running_mean = mj.at("running_mean").get<std::vector<double>>();
                m.running_var = mj.at("running_var").get<std::vector<double>>();
                model.nn.members.push_back(std::move(m));
            }
        } else {
            throw ParseError("load_model: unknown kind '" + model.kind + "'");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("load_model: missing field: ") + e.what());
    }
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_model: cannot read " + path);
    return load_model(f);
}

} // namespace ersm
