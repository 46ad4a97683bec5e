// pesa: command-line surface for trajectory generation, training, evaluation,
// rollout, and plot export. Every command is a pure function of (config file,
// flags, input files); all outputs are written atomically.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pesa/checkpoint.hpp"
#include "pesa/image.hpp"
#include "pesa/metrics.hpp"
#include "pesa/model.hpp"
#include "pesa/pde.hpp"
#include "pesa/rng.hpp"
#include "pesa/train.hpp"
#include "pesa/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: one JSON schema shared by all commands. Unknown keys are
// rejected at every level; flags override file values.

struct SystemSection {
    std::string name = "burgers";
    double domain_size = 1.0;
    int grid = 32;
    double dt = 0.001;
    std::map<std::string, double> coefficients;  // empty: system defaults
    int ic_bumps = 4;
    int ic_warmup = 2000;
    int ic_patches = 3;
    double ic_sigma = 1.0;
    int snapshots = 200;
    int save_stride = 10;
    int trajectories = 2;

    pesa::SystemSpec spec() const {
        auto sys = pesa::system_from_name(name);
        auto s = pesa::SystemSpec::make(sys, domain_size, grid, dt, coefficients);
        s.ic_bumps = ic_bumps;
        s.ic_warmup = ic_warmup;
        s.ic_patches = ic_patches;
        s.ic_sigma = ic_sigma;
        return s;
    }
};

struct PathsSection {
    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";
    std::vector<std::string> train_files;
    std::vector<std::string> val_files;
    std::vector<std::string> test_files;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string precision = "f64";
    SystemSection system;
    pesa::ModelConfig model;
    bool pyconv_auto = true;  // "pyconv_init": "auto" -> physical diffusivities
    pesa::TrainConfig train;
    PathsSection paths;
};

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw pesa::ConfigError("unknown key '" + key + "' in " + where + " config");
}

template <typename T>
void get_to(const json& j, const char* key, T& slot) {
    if (j.contains(key)) j.at(key).get_to(slot);
}

SystemSection parse_system(const json& j) {
    reject_unknown(j,
                   {"name", "domain_size", "grid", "dt", "coefficients", "ic_bumps",
                    "ic_warmup", "ic_patches", "ic_sigma", "snapshots", "save_stride",
                    "trajectories"},
                   "system");
    SystemSection s;
    get_to(j, "name", s.name);
    auto sys = pesa::system_from_name(s.name);
    // Per-system defaults unless explicitly overridden.
    s.domain_size = pesa::SystemSpec::default_domain_size(sys);
    s.dt = pesa::SystemSpec::default_dt(sys);
    get_to(j, "domain_size", s.domain_size);
    get_to(j, "grid", s.grid);
    get_to(j, "dt", s.dt);
    get_to(j, "coefficients", s.coefficients);
    get_to(j, "ic_bumps", s.ic_bumps);
    get_to(j, "ic_warmup", s.ic_warmup);
    get_to(j, "ic_patches", s.ic_patches);
    get_to(j, "ic_sigma", s.ic_sigma);
    get_to(j, "snapshots", s.snapshots);
    get_to(j, "save_stride", s.save_stride);
    get_to(j, "trajectories", s.trajectories);
    return s;
}

pesa::TrainConfig parse_train(const json& j) {
    reject_unknown(j,
                   {"batch_size", "epochs", "base_lr", "sched_interval", "sched_gamma",
                    "rollout_len", "checkpoint_every"},
                   "train");
    pesa::TrainConfig t;
    get_to(j, "batch_size", t.batch_size);
    get_to(j, "epochs", t.epochs);
    get_to(j, "base_lr", t.base_lr);
    get_to(j, "sched_interval", t.sched_interval);
    get_to(j, "sched_gamma", t.sched_gamma);
    get_to(j, "rollout_len", t.rollout_len);
    get_to(j, "checkpoint_every", t.checkpoint_every);
    return t;
}

PathsSection parse_paths(const json& j) {
    reject_unknown(
        j, {"data_dir", "checkpoint_dir", "report_dir", "train_files", "val_files", "test_files"},
        "paths");
    PathsSection p;
    get_to(j, "data_dir", p.data_dir);
    get_to(j, "checkpoint_dir", p.checkpoint_dir);
    get_to(j, "report_dir", p.report_dir);
    get_to(j, "train_files", p.train_files);
    get_to(j, "val_files", p.val_files);
    get_to(j, "test_files", p.test_files);
    return p;
}

RunConfig parse_run_config(const json& j) {
    reject_unknown(j, {"seed", "precision", "system", "model", "train", "paths"}, "top-level");
    RunConfig cfg;
    get_to(j, "seed", cfg.seed);
    get_to(j, "precision", cfg.precision);
    if (cfg.precision != "f32" && cfg.precision != "f64")
        throw pesa::ConfigError("precision must be 'f32' or 'f64', got '" + cfg.precision + "'");
    if (j.contains("system")) cfg.system = parse_system(j.at("system"));
    if (j.contains("model")) {
        json m = j.at("model");
        // "pyconv_init": "auto" selects the system's physical diffusivities at
        // train time; any numeric array pins the coefficients explicitly.
        if (m.contains("pyconv_init") && m.at("pyconv_init").is_string()) {
            if (m.at("pyconv_init").get<std::string>() != "auto")
                throw pesa::ConfigError("model.pyconv_init must be \"auto\" or a number array");
            m.erase("pyconv_init");
        } else if (m.contains("pyconv_init")) {
            cfg.pyconv_auto = false;
        }
        cfg.model = pesa::model_config_from_json(m);
    }
    if (j.contains("train")) cfg.train = parse_train(j.at("train"));
    if (j.contains("paths")) cfg.paths = parse_paths(j.at("paths"));
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return {};
    json j;
    try {
        j = json::parse(pesa::read_file(path));
    } catch (const json::exception& e) {
        throw pesa::ConfigError("cannot parse config '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Shared helpers.

std::string hash_file_hex(const std::string& path) {
    std::string bytes = pesa::read_file(path);
    std::uint64_t h = pesa::fnv1a64(bytes.data(), bytes.size());
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

std::vector<std::string> scan_pstr(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pstr")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<pesa::Trajectory> read_all(const std::vector<std::string>& files) {
    std::vector<pesa::Trajectory> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(pesa::read_trajectory(f));
    return out;
}

void check_consistent(const std::vector<pesa::Trajectory>& trajs,
                      const std::vector<std::string>& files) {
    for (std::size_t i = 1; i < trajs.size(); ++i)
        if (trajs[i].spec.grid != trajs[0].spec.grid ||
            trajs[i].snapshot_dt() != trajs[0].snapshot_dt())
            throw pesa::ConfigError("trajectory '" + files[i] +
                                    "' disagrees with '" + files[0] +
                                    "' on grid or snapshot spacing");
}

// Model config completed against the data: dt and h always come from the
// trajectories, pyconv_init from the physical diffusivities when "auto".
pesa::ModelConfig resolve_model(const RunConfig& cfg, const pesa::Trajectory& ref) {
    pesa::ModelConfig m = cfg.model;
    m.dt = ref.snapshot_dt();
    m.h = ref.spec.spacing();
    m.init_seed = cfg.seed;
    if (cfg.pyconv_auto) m.pyconv_init = ref.spec.diffusivities();
    return m;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const RunConfig& cfg, const std::string& out_dir) {
    pesa::SystemSpec spec = cfg.system.spec();
    fs::create_directories(out_dir);

    json manifest;
    manifest["system"] = cfg.system.name;
    manifest["files"] = json::array();
    for (int i = 0; i < cfg.system.trajectories; ++i) {
        std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        pesa::Trajectory traj =
            pesa::simulate(spec, seed, cfg.system.snapshots, cfg.system.save_stride);
        std::string path =
            (fs::path(out_dir) / (cfg.system.name + "_seed" + std::to_string(seed) + ".pstr"))
                .string();
        pesa::write_trajectory(traj, path);
        manifest["files"].push_back(
            {{"path", path}, {"seed", seed}, {"hash", hash_file_hex(path)}});
    }
    std::cout << manifest.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(RunConfig cfg, const std::string& out_dir) {
    if (!out_dir.empty()) cfg.paths.checkpoint_dir = out_dir;

    std::vector<std::string> train_files = cfg.paths.train_files;
    std::vector<std::string> val_files = cfg.paths.val_files;
    if (train_files.empty()) train_files = scan_pstr(cfg.paths.data_dir);
    if (train_files.empty())
        throw pesa::ConfigError("no training data: set paths.train_files or put .pstr files in '" +
                                cfg.paths.data_dir + "'");

    pesa::Dataset data;
    data.train = read_all(train_files);
    data.val = read_all(val_files);
    check_consistent(data.train, train_files);

    pesa::ModelConfig mcfg = resolve_model(cfg, data.train[0]);
    pesa::PeSANet model = pesa::build_variant(mcfg, static_cast<std::size_t>(data.train[0].spec.grid));

    cfg.train.seed = cfg.seed;
    cfg.train.precision = cfg.precision == "f32" ? pesa::Precision::f32 : pesa::Precision::f64;
    cfg.train.checkpoint_dir = cfg.paths.checkpoint_dir;
    if (cfg.train.history_path.empty())
        cfg.train.history_path = (fs::path(cfg.paths.checkpoint_dir) / "history.jsonl").string();
    fs::create_directories(cfg.paths.checkpoint_dir);

    pesa::TrainHistory history = pesa::train(model, data, cfg.train);

    std::string final_path = (fs::path(cfg.paths.checkpoint_dir) / "final.psck").string();
    pesa::write_checkpoint(model, final_path);

    json summary = {{"checkpoint", final_path},
                    {"checkpoint_hash", hash_file_hex(final_path)},
                    {"history", cfg.train.history_path},
                    {"epochs", history.size()},
                    {"variant", pesa::variant_name(mcfg.variant)},
                    {"final_train_loss", history.empty() ? 0.0 : history.back().train_loss}};
    if (!history.empty() && history.back().has_val) summary["val_rmse"] = history.back().val_rmse;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

pesa::EvalReport evaluate_checkpoint(const pesa::PeSANet& model,
                                     const std::vector<std::string>& files,
                                     const std::string& checkpoint_id) {
    pesa::EvalReport report;
    report.checkpoint_id = checkpoint_id;
    double sq_sum = 0.0, abs_sum = 0.0, hct_sum = 0.0;
    std::size_t count = 0;

    for (const auto& file : files) {
        pesa::Trajectory truth = pesa::read_trajectory(file);
        if (report.dataset_id.empty()) {
            report.dataset_id = fs::path(file).parent_path().string();
            report.dt = truth.snapshot_dt();
        }
        const std::size_t len = truth.snapshot_len();
        const std::size_t T = static_cast<std::size_t>(truth.snapshots);
        auto pred = pesa::rollout(
            model, pesa::Field(truth.snapshot(0), truth.snapshot(0) + len), T - 1);
        std::vector<double> flat;
        flat.reserve(T * len);
        for (const auto& snap : pred) flat.insert(flat.end(), snap.begin(), snap.end());

        pesa::TrajectoryEval ev;
        ev.id = stem_of(file);
        ev.rmse = pesa::rmse(flat, truth.data);
        ev.mae = pesa::mae(flat, truth.data);
        ev.hct = pesa::hct(flat, truth.data, T, len, truth.snapshot_dt());
        ev.curve = pesa::error_curve(flat, truth.data, T, len, truth.snapshot_dt());
        report.trajectories.push_back(std::move(ev));

        for (std::size_t i = 0; i < flat.size(); ++i) {
            double d = flat[i] - truth.data[i];
            sq_sum += d * d;
            abs_sum += std::abs(d);
        }
        count += flat.size();
        hct_sum += report.trajectories.back().hct;
    }
    if (count == 0) throw pesa::ConfigError("evaluate: no test trajectories");
    report.aggregate_rmse = std::sqrt(sq_sum / static_cast<double>(count));
    report.aggregate_mae = abs_sum / static_cast<double>(count);
    report.aggregate_hct = hct_sum / static_cast<double>(report.trajectories.size());
    return report;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 std::vector<std::string> files, const std::string& out_dir) {
    std::string report_dir = out_dir.empty() ? cfg.paths.report_dir : out_dir;
    if (files.empty()) files = cfg.paths.test_files;
    if (files.empty()) files = scan_pstr(cfg.paths.data_dir);
    if (files.empty()) throw pesa::ConfigError("evaluate: no test trajectories given");

    pesa::PeSANet model = pesa::read_checkpoint(checkpoint);
    pesa::EvalReport report = evaluate_checkpoint(model, files, stem_of(checkpoint));

    fs::create_directories(report_dir);
    std::string report_path = (fs::path(report_dir) / "report.json").string();
    std::string csv_path = (fs::path(report_dir) / "curves.csv").string();
    pesa::atomic_write_file(report_path, pesa::report_to_json(report));
    pesa::atomic_write_file(csv_path, pesa::curves_to_csv(report));

    json summary = {{"report", report_path},
                    {"curves", csv_path},
                    {"aggregate_rmse", report.aggregate_rmse},
                    {"aggregate_mae", report.aggregate_mae},
                    {"aggregate_hct", report.aggregate_hct}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rollout

int cmd_rollout(const std::string& checkpoint, const std::string& init_file, int steps,
                const std::string& out_dir) {
    pesa::PeSANet model = pesa::read_checkpoint(checkpoint);
    pesa::Trajectory source = pesa::read_trajectory(init_file);
    if (steps < 0) steps = source.snapshots - 1;

    auto pred = pesa::rollout(
        model, pesa::Field(source.snapshot(0), source.snapshot(0) + source.snapshot_len()),
        static_cast<std::size_t>(steps));

    pesa::Trajectory out;
    out.spec = source.spec;
    out.seed = source.seed;
    // Keep the physical time axis: model dt = solver dt * save_stride.
    out.save_stride = static_cast<int>(std::lround(model.config().dt / source.spec.dt));
    out.snapshots = steps + 1;
    out.data.reserve(pred.size() * source.snapshot_len());
    for (const auto& snap : pred) out.data.insert(out.data.end(), snap.begin(), snap.end());

    fs::create_directories(out_dir);
    std::string path =
        (fs::path(out_dir) / ("pred_" + stem_of(init_file) + ".pstr")).string();
    pesa::write_trajectory(out, path);
    std::cout << json{{"prediction", path}, {"steps", steps}, {"hash", hash_file_hex(path)}}
                     .dump(2)
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plot

int cmd_plot(const std::string& trajectory_file, const std::string& report_file, int stride,
             const std::string& out_dir) {
    if (trajectory_file.empty() && report_file.empty())
        throw pesa::ConfigError("plot: give --trajectory and/or --report");
    fs::create_directories(out_dir);
    json summary;
    summary["outputs"] = json::array();

    if (!trajectory_file.empty()) {
        pesa::Trajectory traj = pesa::read_trajectory(trajectory_file);
        const int n = traj.spec.grid;
        const std::size_t hw = static_cast<std::size_t>(n) * n;
        for (int t = 0; t < traj.snapshots; t += stride)
            for (int c = 0; c < pesa::SystemSpec::channels; ++c) {
                std::string base = stem_of(trajectory_file) + "_t" + std::to_string(t) + "_c" +
                                   std::to_string(c);
                std::string img = (fs::path(out_dir) / (base + ".pgm")).string();
                pesa::HeatmapInfo info = pesa::write_pgm_heatmap(
                    traj.snapshot(t) + static_cast<std::size_t>(c) * hw, n, n, img);
                pesa::atomic_write_file((fs::path(out_dir) / (base + ".json")).string(),
                                        pesa::heatmap_sidecar_json(info));
                summary["outputs"].push_back(img);
            }
    }

    if (!report_file.empty()) {
        json report = json::parse(pesa::read_file(report_file));
        pesa::EvalReport rep;
        for (const auto& t : report.at("trajectories")) {
            pesa::TrajectoryEval ev;
            ev.id = t.at("id").get<std::string>();
            for (const auto& point : t.at("curve"))
                ev.curve.emplace_back(point.at("t").get<double>(),
                                      point.at("rmse").get<double>());
            rep.trajectories.push_back(std::move(ev));
        }
        std::string csv = (fs::path(out_dir) / (stem_of(report_file) + "_curves.csv")).string();
        pesa::atomic_write_file(csv, pesa::curves_to_csv(rep));
        summary["outputs"].push_back(csv);
    }

    if (summary["outputs"].empty()) throw pesa::ConfigError("plot: inputs produced no outputs");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PeSANet: physics-encoded spectral-attention PDE surrogate"};
    app.require_subcommand(1);
    app.fallthrough(true);  // global flags may follow the subcommand name

    std::string config_path, out_dir, precision, variant;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Run config JSON shared by all commands")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Global seed override");
    app.add_option("--precision", precision, "Numeric precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--out", out_dir, "Output directory override");

    auto* gen = app.add_subcommand("generate", "Simulate ground-truth trajectories");
    std::string g_system;
    std::optional<int> g_traj, g_grid, g_steps, g_stride;
    std::optional<double> g_domain, g_dt;
    gen->add_option("--system", g_system, "burgers, fn, or gs");
    gen->add_option("--trajectories", g_traj, "Number of trajectories (seeds seed..seed+n-1)");
    gen->add_option("--grid", g_grid, "Grid points per side");
    gen->add_option("--steps", g_steps, "Stored snapshots after the IC");
    gen->add_option("--save-stride", g_stride, "Solver steps per stored snapshot");
    gen->add_option("--domain-size", g_domain, "Physical length per side");
    gen->add_option("--dt", g_dt, "Solver step (s)");

    auto* tr = app.add_subcommand("train", "Train a model on PSTR trajectories");
    tr->add_option("--variant", variant, "Model variant")
        ->check(CLI::IsMember({"full", "no_sa", "no_pe", "pe_plus_fourier"}));

    auto* ev = app.add_subcommand("evaluate", "Full-horizon rollout evaluation");
    std::string e_checkpoint;
    std::vector<std::string> e_files;
    ev->add_option("--checkpoint", e_checkpoint, "PSCK checkpoint")->required();
    ev->add_option("--data", e_files, "Test trajectory files (default: paths.test_files)");

    auto* ro = app.add_subcommand("rollout", "Write a predicted trajectory");
    std::string r_checkpoint, r_init;
    int r_steps = -1;
    ro->add_option("--checkpoint", r_checkpoint, "PSCK checkpoint")->required();
    ro->add_option("--init", r_init, "PSTR file providing the initial condition")->required();
    ro->add_option("--steps", r_steps, "Rollout steps (default: source horizon)");

    auto* pl = app.add_subcommand("plot", "Export PGM heatmaps and error-curve CSVs");
    std::string p_traj, p_report;
    int p_stride = 1;
    pl->add_option("--trajectory", p_traj, "PSTR file to render as heatmaps");
    pl->add_option("--report", p_report, "EvalReport JSON to convert to CSV");
    pl->add_option("--stride", p_stride, "Snapshot stride for heatmaps")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!precision.empty()) cfg.precision = precision;
        pesa::set_precision(cfg.precision == "f32" ? pesa::Precision::f32
                                                   : pesa::Precision::f64);

        if (gen->parsed()) {
            if (!g_system.empty() && g_system != cfg.system.name) {
                cfg.system.name = g_system;
                auto sys = pesa::system_from_name(g_system);
                cfg.system.domain_size = pesa::SystemSpec::default_domain_size(sys);
                cfg.system.dt = pesa::SystemSpec::default_dt(sys);
                cfg.system.coefficients.clear();
            }
            if (g_traj) cfg.system.trajectories = *g_traj;
            if (g_grid) cfg.system.grid = *g_grid;
            if (g_steps) cfg.system.snapshots = *g_steps + 1;  // --steps 0: IC only
            if (g_stride) cfg.system.save_stride = *g_stride;
            if (g_domain) cfg.system.domain_size = *g_domain;
            if (g_dt) cfg.system.dt = *g_dt;
            return cmd_generate(cfg, out_dir.empty() ? cfg.paths.data_dir : out_dir);
        }
        if (tr->parsed()) {
            if (!variant.empty()) cfg.model.variant = pesa::variant_from_name(variant);
            return cmd_train(std::move(cfg), out_dir);
        }
        if (ev->parsed()) return cmd_evaluate(cfg, e_checkpoint, e_files, out_dir);
        if (ro->parsed())
            return cmd_rollout(r_checkpoint, r_init, r_steps,
                               out_dir.empty() ? cfg.paths.report_dir : out_dir);
        if (pl->parsed())
            return cmd_plot(p_traj, p_report, p_stride,
                            out_dir.empty() ? cfg.paths.report_dir : out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
