// Command-line front end: subcommand dispatch, key = value config files,
// flag/env/file precedence, run manifests, and file emission. All writes go
// under out_dir.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lrfield/errors.hpp"
#include "lrfield/field_sim.hpp"
#include "lrfield/functionals.hpp"
#include "lrfield/ks_study.hpp"
#include "lrfield/stats.hpp"
#include "lrfield/surface.hpp"
#include "lrfield/version.hpp"

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lrf::config_error("cannot read config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw lrf::config_error(path + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw lrf::config_error(path + ":" + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw lrf::config_error("config key '" + key + "': cannot parse '" + value +
                                "' as a real number");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw lrf::config_error("config key '" + key + "': cannot parse '" + value +
                                "' as an integer");
    }
}

// "a:b:step" expands to {a, a+step, ..., <= b}; a comma list is taken as is
std::vector<double> parse_radii(const std::string& value) {
    std::vector<double> out;
    if (value.find(':') != std::string::npos) {
        double a = 0.0, b = 0.0, step = 0.0;
        char extra = 0;
        if (std::sscanf(value.c_str(), "%lf:%lf:%lf%c", &a, &b, &step, &extra) != 3)
            throw lrf::config_error("config key 'radii': expected start:stop:step, got '" +
                                    value + "'");
        if (!(step > 0.0) || b < a)
            throw lrf::config_error("config key 'radii': need start <= stop and step > 0");
        for (double r = a; r <= b + 1e-9 * step; r += step) out.push_back(r);
        return out;
    }
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(parse_real("radii", t));
    }
    if (out.empty()) throw lrf::config_error("config key 'radii': no values in '" + value + "'");
    return out;
}

lrf::surface_kind parse_surface(const std::string& value) {
    if (value == "sphere") return lrf::surface_kind::sphere;
    if (value == "cube") return lrf::surface_kind::cube;
    throw lrf::config_error("config key 'surface': expected sphere or cube, got '" + value + "'");
}

lrf::weight_kind parse_weight(const std::string& value) {
    if (value == "constant_one") return lrf::weight_kind::constant_one;
    if (value == "sphere_weight") return lrf::weight_kind::sphere_weight;
    if (value == "cube_weight") return lrf::weight_kind::cube_weight;
    if (value == "custom_harmonic") return lrf::weight_kind::custom_harmonic;
    throw lrf::config_error(
        "config key 'weight': expected constant_one, sphere_weight, cube_weight, or "
        "custom_harmonic, got '" +
        value + "'");
}

std::string iso_utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Flag > environment (out_dir, workers) > config file > built-in default.
struct OptionSource {
    const std::map<std::string, std::string>* file = nullptr;
    std::set<std::string> allowed;

    void reject_unknown_keys() const {
        if (!file) return;
        for (const auto& [key, value] : *file) {
            (void)value;
            if (!allowed.count(key))
                throw lrf::config_error("unknown config key '" + key + "' for this subcommand");
        }
    }
    bool has(const std::string& key) const { return file && file->count(key) > 0; }
    const std::string& raw(const std::string& key) const { return file->at(key); }
};

struct Cli {
    std::string config_path;
    std::string out_dir;
    std::string surface = "sphere";
    std::string weight = "constant_one";
    double alpha = 2.0 / 3.0;
    int kappa = 2;
    std::string g = "hermite2";
    std::string radii = "20:120:20";
    double reference_radius = 0.0; // 0: use 4/3 of the largest grid radius
    int replicates = 500;
    int repeats = 20;
    double points_density = 0.005;
    std::uint64_t seed = 1;
    int workers = 0; // 0: machine parallelism
    double radius = 20.0;
    int points = 200;
    std::string fields_path;
    std::string distances_path;
    bool share_fields = false;
    bool self_test = false;
    long long mem_budget_mib = 2048;
    bool dry_run = false;

    CLI::App* active = nullptr;

    bool flag_given(const std::string& name) const {
        return active != nullptr && active->count(name) > 0;
    }
};

struct Manifest {
    fs::path path;
    std::string subcommand;
    std::string start_time;
    std::vector<std::pair<std::string, std::string>> entries;

    void write(const std::string& end_time) const {
        std::ofstream out(path);
        if (!out) throw lrf::resource_error("cannot write manifest " + path.string());
        out << "tool_version = " << lrf::version_string << '\n';
        out << "subcommand = " << subcommand << '\n';
        out << "start_time = " << start_time << '\n';
        out << "end_time = " << end_time << '\n';
        for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    }
};

// Resolution helpers: the manifest records every resolved value.
class Resolved {
  public:
    Resolved(const Cli& cli, const OptionSource& src) : cli_(cli), src_(src) {}

    std::string get_string(const std::string& key, const std::string& flag,
                           const std::string& flag_value, const std::string& fallback) {
        std::string v = fallback;
        if (src_.has(key)) v = src_.raw(key);
        if (cli_.flag_given(flag)) v = flag_value;
        record(key, v);
        return v;
    }
    double get_real(const std::string& key, const std::string& flag, double flag_value,
                    double fallback) {
        double v = fallback;
        if (src_.has(key)) v = parse_real(key, src_.raw(key));
        if (cli_.flag_given(flag)) v = flag_value;
        record(key, format_real(v));
        return v;
    }
    long long get_int(const std::string& key, const std::string& flag, long long flag_value,
                      long long fallback) {
        long long v = fallback;
        if (src_.has(key)) v = parse_int(key, src_.raw(key));
        if (cli_.flag_given(flag)) v = flag_value;
        record(key, std::to_string(v));
        return v;
    }
    void record(const std::string& key, const std::string& value) {
        entries.emplace_back(key, value);
    }

    std::vector<std::pair<std::string, std::string>> entries;

  private:
    const Cli& cli_;
    const OptionSource& src_;
};

fs::path resolve_out_dir(const Cli& cli, const OptionSource& src) {
    std::string dir = "lrfield_out";
    if (src.has("out_dir")) dir = src.raw("out_dir");
    if (const char* env = std::getenv("LRFIELD_OUT_DIR"); env != nullptr && *env != 0) dir = env;
    if (cli.flag_given("--out-dir")) dir = cli.out_dir;
    fs::path abs = fs::absolute(dir);
    fs::create_directories(abs);
    return abs;
}

int resolve_workers(const Cli& cli) {
    int w = 0;
    if (const char* env = std::getenv("LRFIELD_WORKERS"); env != nullptr && *env != 0)
        w = static_cast<int>(parse_int("LRFIELD_WORKERS", env));
    if (cli.flag_given("--workers")) w = cli.workers;
    if (w <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        w = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return w;
}

Manifest start_manifest(const std::string& subcommand, const fs::path& out_dir,
                        const Cli& cli, Resolved& resolved,
                        const std::vector<std::string>& outputs) {
    Manifest manifest;
    manifest.path = out_dir / "manifest.txt";
    manifest.subcommand = subcommand;
    manifest.start_time = iso_utc_now();
    manifest.entries.emplace_back("config_file",
                                  cli.config_path.empty()
                                      ? std::string("(none)")
                                      : fs::absolute(cli.config_path).string());
    manifest.entries.emplace_back("out_dir", out_dir.string());
    manifest.entries.emplace_back("dry_run", cli.dry_run ? "1" : "0");
    for (const auto& e : resolved.entries) manifest.entries.push_back(e);
    std::string joined;
    for (const auto& name : outputs) {
        if (!joined.empty()) joined += ' ';
        joined += (out_dir / name).string();
    }
    manifest.entries.emplace_back("outputs", joined.empty() ? "(none)" : joined);
    manifest.write("pending");
    return manifest;
}

lrf::SurfaceCloud build_cloud(lrf::surface_kind kind, double radius, int points) {
    return kind == lrf::surface_kind::sphere ? lrf::sphere_points(radius, points)
                                             : lrf::cube_points(radius, points);
}

lrf::FunctionalConfig build_functional(double alpha, int kappa, const std::string& g_id,
                                       lrf::weight_kind weight) {
    const lrf::GFunction g = lrf::g_from_id(g_id);
    const lrf::HermiteSpec spec = lrf::hermite_coeffs(g, std::max(kappa + 2, 8), 64);
    if (spec.rank != kappa)
        throw lrf::config_error("config key 'kappa': " + std::to_string(kappa) +
                                " does not match the Hermite rank " + std::to_string(spec.rank) +
                                " of g = " + g_id);
    lrf::WeightFunction w;
    w.kind = weight;
    const lrf::CovarianceModel model{lrf::covariance_family::cauchy, alpha, 3};
    return lrf::make_functional_config(model, w, spec);
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lrf::resource_error("cannot write " + path.string());
    out << content;
}

int run_sample_surface(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    const auto surface = parse_surface(resolved.get_string("surface", "--surface", cli.surface,
                                                           cli.surface));
    const double radius = resolved.get_real("radius", "--radius", cli.radius, cli.radius);
    const auto points =
        static_cast<int>(resolved.get_int("points", "--points", cli.points, cli.points));
    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest = start_manifest("sample-surface", out_dir, cli, resolved, {"cloud.csv"});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    const auto cloud = build_cloud(surface, radius, points);
    std::ofstream out(out_dir / "cloud.csv", std::ios::binary);
    if (!out) throw lrf::resource_error("cannot write cloud.csv");
    lrf::write_cloud_csv(cloud, out);
    out.close();
    std::cout << "wrote " << (out_dir / "cloud.csv").string() << " (" << cloud.size()
              << " points, area " << format_real(cloud.area) << ")\n";
    manifest.write(iso_utc_now());
    return 0;
}

int run_simulate_field(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    const auto surface = parse_surface(resolved.get_string("surface", "--surface", cli.surface,
                                                           cli.surface));
    const double radius = resolved.get_real("radius", "--radius", cli.radius, cli.radius);
    const auto points =
        static_cast<int>(resolved.get_int("points", "--points", cli.points, cli.points));
    const double alpha = resolved.get_real("alpha", "--alpha", cli.alpha, cli.alpha);
    const auto replicates = static_cast<int>(
        resolved.get_int("replicates", "--replicates", cli.replicates, cli.replicates));
    const auto seed = static_cast<std::uint64_t>(
        resolved.get_int("seed", "--seed", static_cast<long long>(cli.seed),
                         static_cast<long long>(cli.seed)));
    const lrf::CovarianceModel model{lrf::covariance_family::cauchy, alpha, 3};
    lrf::validate(model);
    if (replicates < 1) throw lrf::config_error("config key 'replicates': must be >= 1");
    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest = start_manifest("simulate-field", out_dir, cli, resolved,
                                       {"cloud.csv", "fields.bin", "meta.txt"});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    const auto cloud = build_cloud(surface, radius, points);
    const auto factor = lrf::factor_covariance(model, cloud);
    const Eigen::MatrixXd fields = lrf::simulate_matrix(factor, {seed, 0, 0}, replicates);
    {
        std::ofstream out(out_dir / "cloud.csv", std::ios::binary);
        lrf::write_cloud_csv(cloud, out);
    }
    {
        std::ofstream out(out_dir / "fields.bin", std::ios::binary);
        lrf::write_fields_binary(out, fields);
    }
    std::ostringstream meta;
    meta << "points = " << cloud.size() << "\nreplicates = " << replicates
         << "\njitter = " << format_real(factor.jitter) << "\nseed = " << seed << '\n';
    write_text_file(out_dir / "meta.txt", meta.str());
    std::cout << "wrote " << (out_dir / "fields.bin").string() << " (" << cloud.size() << " x "
              << replicates << ")\n";
    manifest.write(iso_utc_now());
    return 0;
}

Eigen::MatrixXd read_fields_any(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lrf::config_error("cannot read fields file " + path.string());
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.seekg(0);
    if (in.gcount() == 4 && std::string(magic, 4) == "LRF1") return lrf::read_fields_binary(in);
    // CSV fallback: one replicate per line, comma-separated values
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) row.push_back(parse_real("fields", trim(item)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw lrf::domain_error("fields CSV: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw lrf::domain_error("fields CSV: no rows");
    Eigen::MatrixXd fields(static_cast<Eigen::Index>(rows.front().size()),
                           static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t i = 0; i < rows[k].size(); ++i) {
            fields(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[k][i];
        }
    }
    return fields;
}

int run_compute_functional(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    const auto surface = parse_surface(resolved.get_string("surface", "--surface", cli.surface,
                                                           cli.surface));
    const double radius = resolved.get_real("radius", "--radius", cli.radius, cli.radius);
    const auto points =
        static_cast<int>(resolved.get_int("points", "--points", cli.points, cli.points));
    const double alpha = resolved.get_real("alpha", "--alpha", cli.alpha, cli.alpha);
    const auto kappa = static_cast<int>(resolved.get_int("kappa", "--kappa", cli.kappa, cli.kappa));
    const std::string g_id = resolved.get_string("g", "--g", cli.g, cli.g);
    const auto weight = parse_weight(resolved.get_string("weight", "--weight", cli.weight,
                                                         cli.weight));
    const std::string fields_file =
        resolved.get_string("fields", "--fields", cli.fields_path, cli.fields_path);
    if (fields_file.empty()) throw lrf::config_error("config key 'fields': a path is required");
    resolved.entries.back() = {"fields", fs::absolute(fields_file).string()};
    const auto fcfg = build_functional(alpha, kappa, g_id, weight);
    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest =
        start_manifest("compute-functional", out_dir, cli, resolved, {"functional.csv"});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    const auto cloud = build_cloud(surface, radius, points);
    const Eigen::MatrixXd fields = read_fields_any(fs::absolute(fields_file));
    if (static_cast<std::size_t>(fields.rows()) != cloud.size())
        throw lrf::domain_error("fields block has " + std::to_string(fields.rows()) +
                                " points per replicate but the cloud has " +
                                std::to_string(cloud.size()));
    std::ofstream out(out_dir / "functional.csv", std::ios::binary);
    if (!out) throw lrf::resource_error("cannot write functional.csv");
    out << "replicate,x_value\n";
    std::vector<double> column(cloud.size());
    for (Eigen::Index k = 0; k < fields.cols(); ++k) {
        for (std::size_t i = 0; i < cloud.size(); ++i)
            column[i] = fields(static_cast<Eigen::Index>(i), k);
        out << k << ',' << format_real(lrf::functional_X(fcfg, cloud, column, radius)) << '\n';
    }
    out.close();
    std::cout << "wrote " << (out_dir / "functional.csv").string() << " (" << fields.cols()
              << " replicates)\n";
    manifest.write(iso_utc_now());
    return 0;
}

int run_ks_study(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    lrf::StudyConfig cfg;
    cfg.surface = parse_surface(resolved.get_string("surface", "--surface", cli.surface,
                                                    cli.surface));
    cfg.weight = parse_weight(resolved.get_string("weight", "--weight", cli.weight, cli.weight));
    cfg.alpha = resolved.get_real("alpha", "--alpha", cli.alpha, cli.alpha);
    cfg.kappa = static_cast<int>(resolved.get_int("kappa", "--kappa", cli.kappa, cli.kappa));
    cfg.g_id = resolved.get_string("g", "--g", cli.g, cli.g);
    cfg.radii = parse_radii(resolved.get_string("radii", "--radii", cli.radii, cli.radii));
    {
        std::string joined;
        for (double r : cfg.radii) {
            if (!joined.empty()) joined += ',';
            joined += format_real(r);
        }
        resolved.entries.back() = {"radii", joined};
    }
    cfg.reference_radius = 0.0;
    if (src.has("reference_radius"))
        cfg.reference_radius = parse_real("reference_radius", src.raw("reference_radius"));
    if (cli.flag_given("--reference-radius")) cfg.reference_radius = cli.reference_radius;
    if (cfg.reference_radius == 0.0) cfg.reference_radius = 4.0 / 3.0 * cfg.radii.back();
    resolved.record("reference_radius", format_real(cfg.reference_radius));
    cfg.replicates = static_cast<int>(
        resolved.get_int("replicates", "--replicates", cli.replicates, cli.replicates));
    cfg.repeats =
        static_cast<int>(resolved.get_int("repeats", "--repeats", cli.repeats, cli.repeats));
    cfg.points_density = resolved.get_real("points_density", "--points-density",
                                           cli.points_density, cli.points_density);
    cfg.master_seed = static_cast<std::uint64_t>(
        resolved.get_int("seed", "--seed", static_cast<long long>(cli.seed),
                         static_cast<long long>(cli.seed)));
    cfg.workers = resolve_workers(cli);
    cfg.share_fields = cli.share_fields;
    cfg.self_test = cli.self_test;
    cfg.mem_budget_bytes = cli.mem_budget_mib << 20;
    resolved.record("workers", std::to_string(cfg.workers));
    resolved.record("share_fields", cfg.share_fields ? "1" : "0");
    resolved.record("self_test", cfg.self_test ? "1" : "0");

    lrf::study_functional_config(cfg); // full validation before the manifest
    lrf::check_study_feasibility(cfg);

    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest = start_manifest(
        "ks-study", out_dir, cli, resolved,
        {"distances.csv", "boxes.csv", "rate_fit.csv", "boxes.svg", "logboxes.svg", "meta.txt"});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    const auto result = lrf::run_study(cfg, [](int done, int total) {
        std::fprintf(stderr, "PROGRESS %d/%d\n", done, total);
    });
    {
        std::ofstream out(out_dir / "distances.csv", std::ios::binary);
        lrf::write_distances_csv(out, cfg, result);
    }
    {
        std::ofstream out(out_dir / "boxes.csv", std::ios::binary);
        lrf::write_boxes_csv(out, result);
    }
    {
        std::ofstream out(out_dir / "rate_fit.csv", std::ios::binary);
        lrf::write_rate_fit_csv(out, result);
    }
    write_text_file(out_dir / "boxes.svg",
                    lrf::render_box_svg(result.radii, result.boxes, "KS distance"));
    write_text_file(out_dir / "logboxes.svg",
                    lrf::render_box_svg(result.radii, result.log_boxes, "log KS distance"));
    {
        std::ofstream out(out_dir / "meta.txt", std::ios::binary);
        lrf::write_study_meta(out, cfg, result);
    }
    if (result.fit_valid) {
        std::cout << "rate fit: intercept = " << format_real(result.fit.intercept)
                  << ", slope = " << format_real(result.fit.slope)
                  << ", slope_se = " << format_real(result.fit.slope_se) << '\n';
    }
    std::cout << "wrote " << (out_dir / "distances.csv").string() << '\n';
    manifest.write(iso_utc_now());
    return 0;
}

int run_rate_fit(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    const std::string distances_file = resolved.get_string("distances", "--distances",
                                                           cli.distances_path, cli.distances_path);
    if (distances_file.empty())
        throw lrf::config_error("config key 'distances': a path is required");
    resolved.entries.back() = {"distances", fs::absolute(distances_file).string()};
    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest = start_manifest("rate-fit", out_dir, cli, resolved, {"rate_fit.csv"});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    std::ifstream in(fs::absolute(distances_file));
    if (!in) throw lrf::config_error("cannot read distances file " + distances_file);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "surface,weight,r,repeat,ks_distance")
        throw lrf::domain_error("distances file: expected header surface,weight,r,repeat,ks_distance");
    std::vector<double> rs, ds;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string surface, weight, r, repeat, d;
        if (!std::getline(ss, surface, ',') || !std::getline(ss, weight, ',') ||
            !std::getline(ss, r, ',') || !std::getline(ss, repeat, ',') || !std::getline(ss, d))
            throw lrf::domain_error("distances file line " + std::to_string(lineno) +
                                    ": expected 5 columns");
        rs.push_back(parse_real("r", trim(r)));
        ds.push_back(parse_real("ks_distance", trim(d)));
    }
    const auto fit = lrf::fit_log_rate(rs, ds);
    lrf::StudyResult wrapper;
    wrapper.fit = fit;
    wrapper.fit_valid = true;
    {
        std::ofstream out(out_dir / "rate_fit.csv", std::ios::binary);
        lrf::write_rate_fit_csv(out, wrapper);
    }
    std::cout << "intercept = " << format_real(fit.intercept)
              << ", slope = " << format_real(fit.slope)
              << ", slope_se = " << format_real(fit.slope_se) << ", n_points = " << fit.n_points
              << ", excluded_zeros = " << fit.excluded_zeros << '\n';
    manifest.write(iso_utc_now());
    return 0;
}

int run_variance_check(const Cli& cli, const OptionSource& src) {
    Resolved resolved(cli, src);
    const auto surface = parse_surface(resolved.get_string("surface", "--surface", cli.surface,
                                                           cli.surface));
    const double radius = resolved.get_real("radius", "--radius", cli.radius, cli.radius);
    const auto points =
        static_cast<int>(resolved.get_int("points", "--points", cli.points, cli.points));
    const double alpha = resolved.get_real("alpha", "--alpha", cli.alpha, cli.alpha);
    const auto kappa = static_cast<int>(resolved.get_int("kappa", "--kappa", cli.kappa, cli.kappa));
    const std::string g_id = resolved.get_string("g", "--g", cli.g, cli.g);
    const auto weight = parse_weight(resolved.get_string("weight", "--weight", cli.weight,
                                                         cli.weight));
    const auto replicates = static_cast<int>(
        resolved.get_int("replicates", "--replicates", cli.replicates, 10000));
    const auto seed = static_cast<std::uint64_t>(
        resolved.get_int("seed", "--seed", static_cast<long long>(cli.seed),
                         static_cast<long long>(cli.seed)));
    if (replicates < 100) throw lrf::config_error("config key 'replicates': need >= 100");
    const auto fcfg = build_functional(alpha, kappa, g_id, weight);
    const fs::path out_dir = resolve_out_dir(cli, src);
    Manifest manifest = start_manifest("variance-check", out_dir, cli, resolved, {});
    if (cli.dry_run) {
        manifest.write(iso_utc_now());
        return 0;
    }
    const auto cloud = build_cloud(surface, radius, points);
    const double exact = lrf::exact_variance(fcfg, cloud, radius);
    const auto factor = lrf::factor_covariance(fcfg.model, cloud);
    const Eigen::MatrixXd eta = lrf::simulate_matrix(factor, {seed, 0, 0}, replicates);
    std::vector<double> column(cloud.size());
    std::vector<double> xs(static_cast<std::size_t>(replicates));
    for (int k = 0; k < replicates; ++k) {
        for (std::size_t i = 0; i < cloud.size(); ++i)
            column[i] = eta(static_cast<Eigen::Index>(i), k);
        xs[static_cast<std::size_t>(k)] =
            lrf::functional_X(fcfg, cloud, column, radius, lrf::functional_mode::kappa_term);
    }
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= replicates;
    double m2 = 0.0, m4 = 0.0;
    for (double v : xs) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    const double var = m2 / (replicates - 1);
    m4 /= replicates;
    const double se = std::sqrt((m4 - var * var) / replicates);
    const bool pass = std::fabs(var - exact) <= 3.0 * se;
    std::cout << "exact_variance = " << format_real(exact) << '\n';
    std::cout << "mc_variance = " << format_real(var) << " (" << replicates << " replicates)\n";
    std::cout << "|difference| = " << format_real(std::fabs(var - exact))
              << ", 3*SE = " << format_real(3.0 * se) << '\n';
    std::cout << (pass ? "PASS" : "FAIL") << " (criterion: |mc - exact| <= 3 SE)\n";
    manifest.write(iso_utc_now());
    return pass ? 0 : 2;
}

void add_common_flags(CLI::App* sub, Cli& cli) {
    sub->add_option("--config", cli.config_path, "key = value configuration file");
    sub->add_option("--out-dir", cli.out_dir, "output directory (default lrfield_out)");
    sub->add_flag("--dry-run", cli.dry_run, "validate and write the manifest, compute nothing");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"long-range dependent field functionals toolkit"};
    app.set_version_flag("--version", std::string(lrf::version_string));
    app.require_subcommand(1);
    Cli cli;

    CLI::App* sample = app.add_subcommand("sample-surface", "write a surface point cloud CSV");
    add_common_flags(sample, cli);
    sample->add_option("--surface", cli.surface, "sphere or cube");
    sample->add_option("--radius", cli.radius, "surface radius");
    sample->add_option("--points", cli.points, "point count target");

    CLI::App* sim = app.add_subcommand("simulate-field", "draw Gaussian field replicates");
    add_common_flags(sim, cli);
    sim->add_option("--surface", cli.surface, "sphere or cube");
    sim->add_option("--radius", cli.radius, "surface radius");
    sim->add_option("--points", cli.points, "point count target");
    sim->add_option("--alpha", cli.alpha, "covariance decay exponent");
    sim->add_option("--replicates", cli.replicates, "number of field replicates");
    sim->add_option("--seed", cli.seed, "master seed");

    CLI::App* cf = app.add_subcommand("compute-functional",
                                      "evaluate the weighted functional per replicate");
    add_common_flags(cf, cli);
    cf->add_option("--surface", cli.surface, "sphere or cube");
    cf->add_option("--radius", cli.radius, "surface radius");
    cf->add_option("--points", cli.points, "point count target");
    cf->add_option("--alpha", cli.alpha, "covariance decay exponent");
    cf->add_option("--kappa", cli.kappa, "Hermite rank of g");
    cf->add_option("--g", cli.g, "hermite<k>, square, abs, or indicator:<c>");
    cf->add_option("--weight", cli.weight, "angular weight kind");
    cf->add_option("--fields", cli.fields_path, "fields file (LRF1 binary or CSV)");

    CLI::App* study = app.add_subcommand("ks-study", "radius-grid Kolmogorov distance study");
    add_common_flags(study, cli);
    study->add_option("--surface", cli.surface, "sphere or cube");
    study->add_option("--weight", cli.weight, "angular weight kind");
    study->add_option("--alpha", cli.alpha, "covariance decay exponent");
    study->add_option("--kappa", cli.kappa, "Hermite rank of g");
    study->add_option("--g", cli.g, "hermite<k>, square, abs, or indicator:<c>");
    study->add_option("--radii", cli.radii, "grid: start:stop:step or comma list");
    study->add_option("--reference-radius", cli.reference_radius,
                      "large-radius proxy R (default 4/3 of the largest grid radius)");
    study->add_option("--replicates", cli.replicates, "functional draws per sample");
    study->add_option("--repeats", cli.repeats, "independent study repeats");
    study->add_option("--points-density", cli.points_density, "points per unit area");
    study->add_option("--seed", cli.seed, "master seed");
    study->add_option("--workers", cli.workers, "worker threads (0: machine parallelism)");
    study->add_flag("--share-fields", cli.share_fields,
                    "reuse field streams across weight choices");
    study->add_flag("--self-test", cli.self_test,
                    "reference sample reuses the scale streams (expects distance 0)");
    study->add_option("--mem-budget-mib", cli.mem_budget_mib, "factorization memory budget");

    CLI::App* rate = app.add_subcommand("rate-fit", "pooled log-distance regression");
    add_common_flags(rate, cli);
    rate->add_option("--distances", cli.distances_path, "distances.csv from ks-study");

    CLI::App* var = app.add_subcommand("variance-check",
                                       "Monte Carlo variance against the exact bilinear form");
    add_common_flags(var, cli);
    var->add_option("--surface", cli.surface, "sphere or cube");
    var->add_option("--radius", cli.radius, "surface radius");
    var->add_option("--points", cli.points, "point count target");
    var->add_option("--alpha", cli.alpha, "covariance decay exponent");
    var->add_option("--kappa", cli.kappa, "Hermite rank of g");
    var->add_option("--g", cli.g, "hermite<k>, square, abs, or indicator:<c>");
    var->add_option("--weight", cli.weight, "angular weight kind");
    var->add_option("--replicates", cli.replicates, "Monte Carlo replicates");
    var->add_option("--seed", cli.seed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    CLI::App* active = app.get_subcommands().front();
    cli.active = active;

    try {
        std::map<std::string, std::string> file_config;
        if (!cli.config_path.empty()) file_config = read_config_file(cli.config_path);
        OptionSource src;
        src.file = &file_config;
        const std::string name = active->get_name();
        if (name == "sample-surface") {
            src.allowed = {"surface", "radius", "points", "out_dir"};
            src.reject_unknown_keys();
            return run_sample_surface(cli, src);
        }
        if (name == "simulate-field") {
            src.allowed = {"surface", "radius", "points", "alpha", "replicates", "seed", "out_dir"};
            src.reject_unknown_keys();
            return run_simulate_field(cli, src);
        }
        if (name == "compute-functional") {
            src.allowed = {"surface", "radius", "points", "alpha", "kappa",
                           "g",       "weight", "fields", "out_dir"};
            src.reject_unknown_keys();
            return run_compute_functional(cli, src);
        }
        if (name == "ks-study") {
            src.allowed = {"surface",    "weight",           "alpha",
                           "kappa",      "g",                "radii",
                           "reference_radius", "replicates", "repeats",
                           "points_density",   "seed",       "out_dir"};
            src.reject_unknown_keys();
            return run_ks_study(cli, src);
        }
        if (name == "rate-fit") {
            src.allowed = {"distances", "out_dir"};
            src.reject_unknown_keys();
            return run_rate_fit(cli, src);
        }
        src.allowed = {"surface", "radius",     "points", "alpha",  "kappa",
                       "g",       "weight",     "replicates", "seed", "out_dir"};
        src.reject_unknown_keys();
        return run_variance_check(cli, src);
    } catch (const lrf::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const lrf::domain_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const lrf::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 2;
    } catch (const lrf::resource_error& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
