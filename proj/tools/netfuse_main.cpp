// Command-line driver: fit, cross-validate, predict, score model complexity,
// synthesize test panels and export proximity networks.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <nlohmann/json.hpp>

#include "netfuse/admm.hpp"
#include "netfuse/components.hpp"
#include "netfuse/csv.hpp"
#include "netfuse/cv.hpp"

using namespace netfuse;
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct RunConfig {
    std::string rentals, stations, weather, output, bundle, config_path;
    double radius = 1500.0;
    double lambda = 0.0, lambda_n = 0.0, lambda_h = 0.0, rho = 1.0;
    double eps_abs = 1e-5, eps_rel = 1e-4;
    int max_iter = 2000;
    int irls_passes = 3;
    double inner_tol = 1e-7;
    double time_scale = 1.0;
    double fusion_tol = 1e-6;
    bool adapt_rho = true;
    int threads = 0;  // 0: one worker per fold up to the hardware count
    int log_every = 25;
    std::uint64_t seed = 1;
    // cv
    std::vector<double> lambda_grid, lambda_n_grid, lambda_h_grid, radius_grid;
    int folds = 7;
    bool dry_run = false;
    // synth
    int synth_stations = 5, synth_clusters = 2, synth_days = 14;
    int synth_hours = 24, synth_dows = 7;
    double synth_scale = 0.5;
    // predict
    int effect_hour = -1, effect_dow = -1;
    // engines
    std::string mc_engine = "union_find";
    std::string layer_engine = "union_find";
};

void overlay_json(RunConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    const ordered_json j = ordered_json::parse(in);
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("rentals", cfg.rentals);
    get("stations", cfg.stations);
    get("weather", cfg.weather);
    get("output", cfg.output);
    get("bundle", cfg.bundle);
    get("radius", cfg.radius);
    get("lambda", cfg.lambda);
    get("lambda_n", cfg.lambda_n);
    get("lambda_h", cfg.lambda_h);
    get("rho", cfg.rho);
    get("eps_abs", cfg.eps_abs);
    get("eps_rel", cfg.eps_rel);
    get("max_iter", cfg.max_iter);
    get("irls_passes", cfg.irls_passes);
    get("inner_tol", cfg.inner_tol);
    get("time_scale", cfg.time_scale);
    get("fusion_tol", cfg.fusion_tol);
    get("adapt_rho", cfg.adapt_rho);
    get("threads", cfg.threads);
    get("log_every", cfg.log_every);
    get("seed", cfg.seed);
    get("lambda_grid", cfg.lambda_grid);
    get("lambda_n_grid", cfg.lambda_n_grid);
    get("lambda_h_grid", cfg.lambda_h_grid);
    get("radius_grid", cfg.radius_grid);
    get("folds", cfg.folds);
    get("synth_stations", cfg.synth_stations);
    get("synth_clusters", cfg.synth_clusters);
    get("synth_days", cfg.synth_days);
    get("synth_hours", cfg.synth_hours);
    get("synth_dows", cfg.synth_dows);
    get("synth_scale", cfg.synth_scale);
    get("effect_hour", cfg.effect_hour);
    get("effect_dow", cfg.effect_dow);
    get("mc_engine", cfg.mc_engine);
    get("layer_engine", cfg.layer_engine);
}

ordered_json config_to_json(const RunConfig& c)
{
    ordered_json j;
    j["rentals"] = c.rentals;
    j["stations"] = c.stations;
    j["weather"] = c.weather;
    j["output"] = c.output;
    j["bundle"] = c.bundle;
    j["radius"] = c.radius;
    j["lambda"] = c.lambda;
    j["lambda_n"] = c.lambda_n;
    j["lambda_h"] = c.lambda_h;
    j["rho"] = c.rho;
    j["eps_abs"] = c.eps_abs;
    j["eps_rel"] = c.eps_rel;
    j["max_iter"] = c.max_iter;
    j["irls_passes"] = c.irls_passes;
    j["inner_tol"] = c.inner_tol;
    j["time_scale"] = c.time_scale;
    j["fusion_tol"] = c.fusion_tol;
    j["adapt_rho"] = c.adapt_rho;
    j["threads"] = c.threads;
    j["log_every"] = c.log_every;
    j["seed"] = c.seed;
    j["lambda_grid"] = c.lambda_grid;
    j["lambda_n_grid"] = c.lambda_n_grid;
    j["lambda_h_grid"] = c.lambda_h_grid;
    j["radius_grid"] = c.radius_grid;
    j["folds"] = c.folds;
    j["synth_stations"] = c.synth_stations;
    j["synth_clusters"] = c.synth_clusters;
    j["synth_days"] = c.synth_days;
    j["synth_hours"] = c.synth_hours;
    j["synth_dows"] = c.synth_dows;
    j["synth_scale"] = c.synth_scale;
    j["effect_hour"] = c.effect_hour;
    j["effect_dow"] = c.effect_dow;
    j["mc_engine"] = c.mc_engine;
    j["layer_engine"] = c.layer_engine;
    return j;
}

void write_json(const fs::path& path, const ordered_json& j)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

AdmmOptions solver_options(const RunConfig& c)
{
    AdmmOptions opt;
    opt.eps_abs = c.eps_abs;
    opt.eps_rel = c.eps_rel;
    opt.max_iter = c.max_iter;
    opt.irls_passes = c.irls_passes;
    opt.inner_tol = c.inner_tol;
    opt.adapt_rho = c.adapt_rho;
    opt.time_scale = c.time_scale;
    opt.log_every = c.log_every;
    return opt;
}

MultilayerEngine parse_mc_engine(const std::string& s)
{
    if (s == "union_find") return MultilayerEngine::union_find;
    if (s == "label_linking") return MultilayerEngine::label_linking;
    throw ValidationError("unknown mc engine '" + s + "' (union_find|label_linking)");
}

ComponentEngine parse_layer_engine(const std::string& s)
{
    if (s == "union_find") return ComponentEngine::union_find;
    if (s == "spectral") return ComponentEngine::spectral;
    throw ValidationError("unknown layer engine '" + s + "' (union_find|spectral)");
}

ordered_json mc_to_json(const ComplexityReport& rep)
{
    ordered_json j;
    j["unpenalized"] = rep.unpenalized;
    j["multilayer_components"] = rep.multilayer_components;
    j["day_components"] = rep.day_components;
    j["numerator"] = rep.numerator;
    j["total_params"] = rep.total_params;
    j["mc"] = rep.mc;
    return j;
}

ordered_json report_to_json(const SolveReport& rep)
{
    ordered_json j;
    j["iterations"] = rep.iterations;
    j["primal_residual"] = rep.primal_residual;
    j["dual_residual"] = rep.dual_residual;
    j["step1_kkt"] = rep.step1_kkt;
    j["objective"] = rep.objective;
    j["rho"] = rep.rho;
    j["converged"] = rep.converged;
    return j;
}

struct LoadedData {
    StationRegistry reg;
    RentalPanel panel;
};

LoadedData load_inputs(const RunConfig& c)
{
    if (c.rentals.empty() || c.stations.empty() || c.weather.empty())
        throw ValidationError("rentals, stations and weather paths are required");
    LoadedData d;
    d.reg = load_stations(c.stations);
    d.panel = load_panel(c.rentals, c.stations, c.weather);
    return d;
}

int cmd_fit(const RunConfig& c)
{
    const LoadedData data = load_inputs(c);
    fs::create_directories(c.output);
    write_json(fs::path(c.output) / "resolved_config.json", config_to_json(c));

    const ProximityGraph graph = build_proximity(data.reg, c.radius);
    const ProjectionPlan plan(graph, data.panel.dims);
    const AdmmProblem prob(data.panel, data.reg, plan, c.time_scale);

    PenaltyConfig pen;
    pen.lambda = c.lambda;
    pen.lambda_n = c.lambda_n;
    pen.lambda_h = c.lambda_h;
    pen.rho = c.rho;

    std::ofstream log_stream(fs::path(c.output) / "solve_log.jsonl");
    AdmmOptions opt = solver_options(c);
    opt.log_callback = [&](int iter, double rp, double rd, double rho, double obj) {
        ordered_json line;
        line["iter"] = iter;
        line["r_primal"] = rp;
        line["r_dual"] = rd;
        line["rho"] = rho;
        line["objective"] = obj;
        log_stream << line.dump() << '\n';
    };

    AdmmState st = AdmmState::cold(prob.ops(), pen.rho);
    const SolveReport rep = prob.solve(pen, opt, st);
    const ParamState fit = prob.extract_params(st);

    write_param_bundle((fs::path(c.output) / "params").string(), fit, data.panel.station_ids);
    write_json(fs::path(c.output) / "solve_report.json", report_to_json(rep));

    const FusionTolerance tol{c.fusion_tol, false};
    const ComplexityReport mc = model_complexity(graph, PhiView::from(fit), tol,
                                                 parse_mc_engine(c.mc_engine),
                                                 parse_layer_engine(c.layer_engine));
    write_json(fs::path(c.output) / "mc.json", mc_to_json(mc));

    if (!rep.converged) {
        std::cerr << "solver did not converge after " << rep.iterations << " iterations\n";
        return 2;
    }
    return 0;
}

int cmd_cv(const RunConfig& c)
{
    const LoadedData data = load_inputs(c);
    fs::create_directories(c.output);
    write_json(fs::path(c.output) / "resolved_config.json", config_to_json(c));

    GridSpec grid;
    if (!c.lambda_grid.empty()) grid.lambda = c.lambda_grid;
    if (!c.lambda_n_grid.empty()) grid.lambda_n = c.lambda_n_grid;
    if (!c.lambda_h_grid.empty()) grid.lambda_h = c.lambda_h_grid;
    grid.radius = c.radius_grid.empty() ? std::vector<double>{c.radius} : c.radius_grid;

    const FoldPlan folds = make_folds(data.panel, c.folds, c.seed);
    CvOptions opt;
    opt.solver = solver_options(c);
    opt.solver.log_every = 0;
    opt.rho = c.rho;
    opt.threads = c.threads > 0 ? c.threads
                                : int(std::max(1u, std::thread::hardware_concurrency()));
    opt.dry_run = c.dry_run;

    const CvResult res = grid_search(data.panel, data.reg, grid, folds, opt);
    write_cv_table((fs::path(c.output) / "cv_table.csv").string(), res);

    if (c.dry_run) {
        std::cout << "dry run: " << res.table.size() << " fold tasks enumerated\n";
        return 0;
    }
    if (!res.has_winner) {
        std::cerr << "no grid point converged on every fold\n";
        return 2;
    }

    ordered_json winner;
    winner["radius"] = res.best_radius;
    winner["lambda"] = res.best_cfg.lambda;
    winner["lambda_n"] = res.best_cfg.lambda_n;
    winner["lambda_h"] = res.best_cfg.lambda_h;
    winner["cv_mspr"] = res.best_mspr;
    write_json(fs::path(c.output) / "winner.json", winner);

    // refit on the full panel at the selected penalties
    RunConfig refit = c;
    refit.radius = res.best_radius;
    refit.lambda = res.best_cfg.lambda;
    refit.lambda_n = res.best_cfg.lambda_n;
    refit.lambda_h = res.best_cfg.lambda_h;
    return cmd_fit(refit);
}

int cmd_predict(const RunConfig& c)
{
    if (c.bundle.empty()) throw ValidationError("--bundle is required");
    const LoadedData data = load_inputs(c);
    std::vector<std::string> bundle_ids;
    const ParamState fit = read_param_bundle(c.bundle, &bundle_ids);
    fit.validate_dims(data.panel.n_stations(), data.panel.dims);
    if (bundle_ids != data.panel.station_ids)
        throw ValidationError("bundle stations do not match the panel stations");

    fs::create_directories(c.output);
    const Offsets off = Offsets::from(data.reg);
    {
        std::ofstream out(fs::path(c.output) / "mu.csv");
        out << "station_id,date,hour,mu_hat\n";
        for (int s = 0; s < data.panel.n_stations(); ++s)
            for (int t = 0; t < data.panel.n_days(); ++t)
                for (int h = 0; h < data.panel.n_hours(); ++h)
                    out << data.panel.station_ids[s] << ',' << data.panel.dates[t].to_string()
                        << ',' << h << ','
                        << format_double(mean_at(fit, data.panel, off, s, t, h, c.time_scale))
                        << '\n';
    }
    if (c.effect_hour >= 0 && c.effect_dow >= 0) {
        if (c.effect_hour >= data.panel.n_hours() ||
            c.effect_dow >= data.panel.dims.n_days_of_week)
            throw ValidationError("effect hour or day out of range");
        std::ofstream out(fs::path(c.output) / "effects.csv");
        out << "station_id,latitude,longitude,effect\n";
        for (int s = 0; s < data.panel.n_stations(); ++s) {
            // combined temporal effect on the log scale for map plotting
            const double effect = fit.phi_hod(s, c.effect_hour) +
                                  fit.phi_dow(s, c.effect_dow) - fit.theta[s];
            out << data.panel.station_ids[s] << ',' << format_double(data.reg.latitude[s])
                << ',' << format_double(data.reg.longitude[s]) << ',' << format_double(effect)
                << '\n';
        }
    }
    return 0;
}

int cmd_mc(const RunConfig& c)
{
    if (c.bundle.empty() || c.stations.empty())
        throw ValidationError("--bundle and --stations are required");
    const StationRegistry reg = load_stations(c.stations);
    std::vector<std::string> bundle_ids;
    const ParamState fit = read_param_bundle(c.bundle, &bundle_ids);
    if (bundle_ids != reg.ids)
        throw ValidationError("bundle stations do not match the registry");
    const ProximityGraph graph = build_proximity(reg, c.radius);
    const FusionTolerance tol{c.fusion_tol, false};
    const ComplexityReport rep = model_complexity(graph, PhiView::from(fit), tol,
                                                  parse_mc_engine(c.mc_engine),
                                                  parse_layer_engine(c.layer_engine));
    if (c.output.empty()) {
        std::cout << mc_to_json(rep).dump(2) << '\n';
    } else {
        fs::create_directories(c.output);
        write_json(fs::path(c.output) / "mc.json", mc_to_json(rep));
    }
    return 0;
}

// Clustered synthetic truth: tight spatial clusters far apart, parameters
// constant within a cluster.
int cmd_synth(const RunConfig& c)
{
    if (c.output.empty()) throw ValidationError("--output is required");
    const CalendarDims dims{c.synth_hours, c.synth_dows};
    dims.validate();
    if (c.synth_clusters < 1 || c.synth_stations < c.synth_clusters)
        throw ValidationError("need at least one station per cluster");

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> jitter(-4e-4, 4e-4);

    StationRegistry reg;
    for (int s = 0; s < c.synth_stations; ++s) {
        const int cl = s % c.synth_clusters;
        reg.ids.push_back("S" + std::to_string(s));
        reg.latitude.push_back(37.0 + 0.5 * cl + jitter(rng));
        reg.longitude.push_back(127.0 + jitter(rng));
        reg.capacity.push_back(3 + int(rng() % 6));
    }
    reg.validate();

    ParamState truth = ParamState::zeros(c.synth_stations, dims);
    std::vector<double> cl_theta(c.synth_clusters);
    Eigen::MatrixXd cl_hod(c.synth_clusters, dims.hours_free());
    Eigen::MatrixXd cl_dow(c.synth_clusters, dims.dows_free());
    for (int cl = 0; cl < c.synth_clusters; ++cl) {
        cl_theta[cl] = c.synth_scale * gauss(rng);
        for (int h = 0; h < dims.hours_free(); ++h) cl_hod(cl, h) = c.synth_scale * gauss(rng);
        for (int d = 0; d < dims.dows_free(); ++d) cl_dow(cl, d) = c.synth_scale * gauss(rng);
    }
    for (int h = 0; h < dims.hours_free(); ++h) truth.shared_hod[h] = 0.3 * gauss(rng);
    for (int d = 0; d < dims.dows_free(); ++d) truth.shared_dow[d] = 0.3 * gauss(rng);
    for (int s = 0; s < c.synth_stations; ++s) {
        const int cl = s % c.synth_clusters;
        truth.theta[s] = cl_theta[cl];
        truth.hod_int.row(s) = cl_hod.row(cl);
        truth.dow_int.row(s) = cl_dow.row(cl);
    }
    truth.delta.alpha = 0.01;
    truth.delta.beta_rain = -1.5;
    truth.delta.beta_air = Eigen::Vector3d(0.1, 0.15, 0.25);
    truth.normalize_gauge();

    const RentalPanel panel = synth_panel(c.seed + 1, reg, c.synth_days, dims, truth);

    fs::create_directories(c.output);
    const fs::path base(c.output);
    write_panel((base / "rentals.csv").string(), (base / "stations.csv").string(),
                (base / "weather.csv").string(), panel, reg);
    write_param_bundle((base / "truth").string(), truth, reg.ids);
    write_json(base / "resolved_config.json", config_to_json(c));
    return 0;
}

int cmd_export_graph(const RunConfig& c)
{
    if (c.stations.empty() || c.output.empty())
        throw ValidationError("--stations and --output are required");
    const StationRegistry reg = load_stations(c.stations);
    const ProximityGraph graph = build_proximity(reg, c.radius);
    fs::create_directories(c.output);
    export_edge_list((fs::path(c.output) / "edges.csv").string(), graph, reg.ids);
    export_graphml((fs::path(c.output) / "graph.graphml").string(), graph, reg.ids);
    ordered_json meta;
    meta["radius"] = c.radius;
    meta["stations"] = graph.n_stations;
    meta["directed_pairs"] = graph.n_pairs();
    meta["components"] = graph.component_count();
    write_json(fs::path(c.output) / "graph.json", meta);
    return 0;
}

void add_common(CLI::App* cmd, RunConfig& c)
{
    cmd->add_option("--config", c.config_path, "JSON config file (flags override it)");
    cmd->add_option("--rentals", c.rentals, "rentals CSV");
    cmd->add_option("--stations", c.stations, "station registry CSV");
    cmd->add_option("--weather", c.weather, "weather CSV");
    cmd->add_option("--output", c.output, "output directory");
    cmd->add_option("--radius", c.radius, "proximity radius in meters");
    cmd->add_option("--time-scale", c.time_scale, "multiplier for the day index trend");
    cmd->add_option("--threads", c.threads, "worker threads (0 = auto)");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--fusion-tol", c.fusion_tol, "tolerance for fused-estimate detection");
    cmd->add_option("--mc-engine", c.mc_engine, "multilayer counting engine");
    cmd->add_option("--layer-engine", c.layer_engine, "layer labeling engine");
}

void add_solver(CLI::App* cmd, RunConfig& c)
{
    cmd->add_option("--lambda", c.lambda, "l1 weight on interactions");
    cmd->add_option("--lambda-n", c.lambda_n, "network fusion weight");
    cmd->add_option("--lambda-h", c.lambda_h, "hourly fusion weight");
    cmd->add_option("--rho", c.rho, "ADMM step size");
    cmd->add_option("--eps-abs", c.eps_abs, "absolute stopping tolerance");
    cmd->add_option("--eps-rel", c.eps_rel, "relative stopping tolerance");
    cmd->add_option("--max-iter", c.max_iter, "iteration cap");
    cmd->add_option("--irls-passes", c.irls_passes, "working-response refreshes per step");
    cmd->add_option("--inner-tol", c.inner_tol, "inner coordinate-descent tolerance");
    cmd->add_flag("--adapt-rho,!--no-adapt-rho", c.adapt_rho, "residual-balancing step size");
    cmd->add_option("--log-every", c.log_every, "solver log cadence (0 = off)");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"penalized spatio-temporal count panel fitting"};
    app.require_subcommand(1);

    RunConfig cfg;
    // apply a --config file first so explicit flags override it
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                overlay_json(cfg, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << '\n';
                return 1;
            }
        }

    auto* fit = app.add_subcommand("fit", "fit a penalized model");
    add_common(fit, cfg);
    add_solver(fit, cfg);

    auto* cv = app.add_subcommand("cv", "cross-validate over a penalty grid");
    add_common(cv, cfg);
    add_solver(cv, cfg);
    cv->add_option("--lambda-grid", cfg.lambda_grid, "l1 grid")->delimiter(',');
    cv->add_option("--lambda-n-grid", cfg.lambda_n_grid, "network fusion grid")->delimiter(',');
    cv->add_option("--lambda-h-grid", cfg.lambda_h_grid, "hourly fusion grid")->delimiter(',');
    cv->add_option("--radius-grid", cfg.radius_grid, "radius grid in meters")->delimiter(',');
    cv->add_option("--folds", cfg.folds, "fold count");
    cv->add_flag("--dry-run", cfg.dry_run, "enumerate the task matrix without fitting");

    auto* predict = app.add_subcommand("predict", "per-observation fitted means");
    add_common(predict, cfg);
    predict->add_option("--bundle", cfg.bundle, "parameter bundle directory");
    predict->add_option("--effect-hour", cfg.effect_hour, "hour for the effect export");
    predict->add_option("--effect-dow", cfg.effect_dow, "day category for the effect export");

    auto* mc = app.add_subcommand("mc", "model complexity of a fitted bundle");
    add_common(mc, cfg);
    mc->add_option("--bundle", cfg.bundle, "parameter bundle directory");

    auto* synth = app.add_subcommand("synth", "generate a synthetic clustered panel");
    add_common(synth, cfg);
    synth->add_option("--synth-stations", cfg.synth_stations, "station count");
    synth->add_option("--synth-clusters", cfg.synth_clusters, "planted cluster count");
    synth->add_option("--synth-days", cfg.synth_days, "day count");
    synth->add_option("--synth-hours", cfg.synth_hours, "hours per day");
    synth->add_option("--synth-dows", cfg.synth_dows, "day-of-week categories");
    synth->add_option("--synth-scale", cfg.synth_scale, "cluster effect scale");

    auto* exportg = app.add_subcommand("export-graph", "export the proximity network");
    add_common(exportg, cfg);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) return cmd_fit(cfg);
        if (cv->parsed()) return cmd_cv(cfg);
        if (predict->parsed()) return cmd_predict(cfg);
        if (mc->parsed()) return cmd_mc(cfg);
        if (synth->parsed()) return cmd_synth(cfg);
        if (exportg->parsed()) return cmd_export_graph(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
