// Generates the synthetic inputs used by the CLI integration script: a
// station pair whose local series is an offset, scaled copy of the reference
// series, plus a flat Kp listing, a constant core-magnitude CSV, and a shared
// config file. Station AAA sits 7.52 degrees east of BBB, a rotation offset
// of 1800 s.

#include <ersm/ersm.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace {

constexpr double kPi = 3.14159265358979323846;

double slow(double t) {
    return 30.0 * std::sin(2.0 * kPi * t / 86400.0) +
           8.0 * std::sin(2.0 * kPi * t / 43200.0 + 1.1);
}

ersm::TimeSeries series(double start, size_t n, double (*f)(double)) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i)
        v[i] = f(start + static_cast<double>(i) * 60.0);
    return ersm::TimeSeries(start, 60.0, std::move(v));
}

void write_station(const std::string& path, const ersm::StationRecord& rec) {
    std::ofstream out(path);
    ersm::write_iaga2002(out, rec);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        std::exit(1);
    }
}

} // namespace

int main(int argc, char** argv) {
    std::string dir = argc > 1 ? argv[1] : "cli_fixtures";
    std::filesystem::create_directories(dir);
    auto path = [&](const std::string& name) {
        return (std::filesystem::path(dir) / name).string();
    };
    auto abs_path = [&](const std::string& name) {
        return std::filesystem::absolute(std::filesystem::path(dir) / name).string();
    };

    const double start = ersm::civil_to_epoch(2023, 1, 1);
    const size_t n = 20 * 1440;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    ersm::StationRecord aaa;
    aaa.iaga_code = "AAA";
    aaa.latitude_deg = 51.0;
    aaa.longitude_deg = 10.0 + 1800.0 * ersm::omega_earth_deg_per_s;
    aaa.elevation_m = 100.0;
    aaa.reported = "XYZF";
    aaa.components["F"] = series(start, n, +[](double t) { return 48000.0 + slow(t); });
    aaa.components["X"] = series(start, n, +[](double t) { return 20400.0 + 0.25 * slow(t); });
    aaa.components["Y"] = series(start, n, +[](double) { return 1200.0; });
    aaa.components["Z"] = series(start, n, +[](double) { return 43000.0; });
    for (size_t i = 5000; i < 5010; ++i)
        for (auto& [name, ts] : aaa.components) ts.values[i] = nan;
    write_station(path("aaa.iaga"), aaa);

    ersm::StationRecord bbb;
    bbb.iaga_code = "BBB";
    bbb.latitude_deg = 50.2;
    bbb.longitude_deg = 10.0;
    bbb.elevation_m = 200.0;
    bbb.reported = "XYZF";
    bbb.components["F"] = series(start, n, +[](double t) {
        return 48000.0 + 2.0 * slow(t - 1800.0) + 3.0;
    });
    std::mt19937_64 rng(424242);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (double& v : bbb.components["F"].values) v += noise(rng);
    bbb.components["X"] = series(start, n, +[](double t) { return 20100.0 + 0.5 * slow(t - 1800.0); });
    bbb.components["Y"] = series(start, n, +[](double) { return 900.0; });
    bbb.components["Z"] = series(start, n, +[](double) { return 43200.0; });
    write_station(path("bbb.iaga"), bbb);

    {
        std::ofstream out(path("kp.txt"));
        out << "# synthetic Kp listing, GFZ column layout\n";
        for (int day = -1; day <= 21; ++day)
            for (int h = 0; h < 24; h += 3) {
                ersm::CivilTime ct = ersm::epoch_to_civil(
                    start + day * 86400.0 + h * 3600.0);
                out << ersm::strformat(
                    "%04d %02d %02d %4.1f %4.1f 0.000 0.000 2.000 7 0\n",
                    ct.year, ct.month, ct.day, static_cast<double>(h),
                    h + 1.5);
            }
    }

    {
        std::ofstream out(path("core.csv"));
        out << "# schema: ersm-core-v1\n";
        out << "epoch_s,core_nT\n";
        for (double t = start - 86400.0; t <= start + 21.0 * 86400.0; t += 3600.0)
            out << ersm::strformat("%.0f,48000\n", t);
    }

    {
        std::ofstream out(path("run.conf"));
        out << "# shared settings for the integration run\n"
            << "kp_path = " << abs_path("kp.txt") << "\n"
            << "core_csv_path = " << abs_path("core.csv") << "\n"
            << "model = linear\n"
            << "cutoff_cph = 0.33\n"
            << "output_cutoff_cph = 1.5\n"
            << "spike_threshold_nt = 500\n"
            << "knn_k_grid = 5, 15\n"
            << "knn_alpha_grid = 1, 4\n"
            << "knn_hops = 1\n"
            << "nn_members = 2\n"
            << "nn_blocks = 1\n"
            << "nn_hidden = 6\n"
            << "nn_epochs = 3\n";
    }

    std::cout << "fixtures -> " << dir << "\n";
    return 0;
}
