#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "pesa/train.hpp"
#include "test_util.hpp"

using namespace pesa;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("pesa_train_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

ModelConfig tiny_cfg(std::size_t grid) {
    ModelConfig cfg;
    cfg.pi_channels = 3;
    cfg.pi_layers = 2;
    cfg.kernel_size = 3;
    cfg.modes1 = 2;
    cfg.modes2 = 2;
    cfg.enc_width = 4;
    cfg.dec_width = 4;
    cfg.attn_hidden = 4;
    cfg.init_seed = 11;
    cfg.h = 1.0 / static_cast<double>(grid);
    cfg.dt = 0.01;
    // Near-physical diffusivity keeps early rollouts stable.
    cfg.pyconv_init = {0.005, 0.005};
    return cfg;
}

Trajectory burgers_traj(int grid, int snapshots, std::uint64_t seed, int stride = 10) {
    auto spec = SystemSpec::make(System::burgers, 1.0, grid, 0.001);
    return simulate(spec, seed, snapshots, stride);
}

Tensor& param(PeSANet& m, const std::string& name) {
    for (auto& p : m.params())
        if (p.name == name) return p.value;
    throw std::runtime_error("no parameter named " + name);
}

}  // namespace

TEST_CASE("rollout: T = 0 returns only the initial condition") {
    PeSANet m(tiny_cfg(8), 8);
    Rng rng(90);
    Tensor ic = testutil::random_tensor({2, 8, 8}, rng);
    auto traj = rollout(m, ic.data(), 0);
    REQUIRE(traj.size() == 1);
    CHECK(traj[0] == ic.data());
}

TEST_CASE("rollout: all-zero model produces a constant trajectory") {
    PeSANet m(tiny_cfg(8), 8);
    for (auto& p : m.params())
        std::fill(p.value.mutable_data().begin(), p.value.mutable_data().end(), 0.0);
    Rng rng(91);
    Tensor ic = testutil::random_tensor({2, 8, 8}, rng);
    auto traj = rollout(m, ic.data(), 5);
    REQUIRE(traj.size() == 6);
    for (const auto& snap : traj) CHECK(snap == ic.data());
}

TEST_CASE("rollout is deterministic") {
    PeSANet m(tiny_cfg(8), 8);
    Rng rng(92);
    Tensor ic = testutil::random_tensor({2, 8, 8}, rng, -0.1, 0.1);
    auto a = rollout(m, ic.data(), 10);
    auto b = rollout(m, ic.data(), 10);
    CHECK(a == b);
}

TEST_CASE("rollout blow-up error carries the failing step index") {
    ModelConfig cfg = tiny_cfg(4);
    cfg.pi_layers = 1;
    cfg.pi_channels = 2;
    PeSANet m(cfg, 4);
    for (auto& p : m.params())
        std::fill(p.value.mutable_data().begin(), p.value.mutable_data().end(), 0.0);
    // Pi-block computes 1e90 * u: the state squares past the double range in
    // a few steps.
    std::vector<double> kern(2 * 2 * 9, 0.0);
    kern[(0 * 2 + 0) * 9 + 4] = 1.0;
    kern[(1 * 2 + 1) * 9 + 4] = 1.0;
    param(m, "pi.branch0.kernel").mutable_data() = kern;
    param(m, "pi.proj").mutable_data() = {1e90, 0.0, 0.0, 1e90};

    std::vector<double> ic(2 * 16, 1.0);
    try {
        rollout(m, ic, 10);
        FAIL("expected BlowupError");
    } catch (const BlowupError& e) {
        CHECK(e.step >= 1);
        CHECK(e.step < 10);
    }
}

TEST_CASE("TrainConfig validation") {
    TrainConfig cfg;
    cfg.rollout_len = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.base_lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.sched_gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("overfit check: single sample, R = 1, 500 epochs reaches loss < 1e-6") {
    const int grid = 8;
    Trajectory traj = burgers_traj(grid, 2, 5);
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = traj.snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.epochs = 500;
    cfg.base_lr = 1e-2;
    cfg.sched_gamma = 1.0;
    cfg.rollout_len = 1;
    cfg.seed = 3;

    auto history = train(m, {{traj}, {}}, cfg);
    REQUIRE(history.size() == 500);
    CHECK(history.back().train_loss < 1e-6);
}

TEST_CASE("descent smoke test: epoch-averaged loss at epoch 50 < loss at epoch 1") {
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 12, 1), burgers_traj(grid, 12, 2)};
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = data.train[0].snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 50;
    cfg.base_lr = 1e-3;
    cfg.rollout_len = 2;
    cfg.seed = 4;

    auto history = train(m, data, cfg);
    CHECK(history.back().train_loss < history.front().train_loss);
}

TEST_CASE("training is bitwise reproducible in double precision") {
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 8, 7)};
    data.val = {burgers_traj(grid, 6, 8)};

    auto run = [&] {
        ModelConfig mcfg = tiny_cfg(grid);
        mcfg.dt = data.train[0].snapshot_dt();
        PeSANet m(mcfg, grid);
        TrainConfig cfg;
        cfg.batch_size = 4;
        cfg.epochs = 10;
        cfg.base_lr = 1e-3;
        cfg.rollout_len = 2;
        cfg.seed = 12;
        cfg.checkpoint_every = 5;
        TrainHistory h = train(m, data, cfg);
        std::vector<std::vector<double>> params;
        for (const auto& p : m.params()) params.push_back(p.value.data());
        return std::pair{history_to_jsonl(h), params};
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("recorded lr follows step_decay on optimizer steps exactly") {
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 10, 9)};
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = data.train[0].snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 12;
    cfg.base_lr = 1e-3;
    cfg.sched_interval = 3;
    cfg.sched_gamma = 0.9;
    cfg.rollout_len = 2;
    cfg.seed = 5;

    auto history = train(m, data, cfg);
    LrSchedule sched{cfg.base_lr, cfg.sched_interval, cfg.sched_gamma};
    // 8 windows / batch 4 = 2 optimizer steps per epoch.
    std::size_t expected_step = 0;
    for (const auto& rec : history) {
        CHECK(rec.opt_step == expected_step);
        CHECK(rec.lr == step_decay(sched, rec.opt_step));
        expected_step += 2;
    }
}

TEST_CASE("loss is non-increasing on a frozen batch at lr 1e-6") {
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 6, 10)};  // 4 windows at R=2
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = data.train[0].snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 16;  // one batch holds every window: frozen batch
    cfg.epochs = 10;
    cfg.base_lr = 1e-6;
    cfg.sched_gamma = 1.0;
    cfg.rollout_len = 2;
    cfg.seed = 6;

    auto history = train(m, data, cfg);
    for (std::size_t e = 1; e < history.size(); ++e)
        CHECK(history[e].train_loss <= history[e - 1].train_loss + 1e-15);
}

TEST_CASE("pyconv stencil is bit-identical across a training run") {
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 8, 11)};
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = data.train[0].snapshot_dt();
    PeSANet m(mcfg, grid);
    std::vector<double> stencil = m.pyconv_stencil().data();

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 20;
    cfg.base_lr = 1e-3;
    cfg.rollout_len = 2;
    cfg.seed = 7;
    train(m, data, cfg);
    CHECK(m.pyconv_stencil().data() == stencil);
}

TEST_CASE("checkpoints, validation records, and the history file are written") {
    TempDir tmp;
    const int grid = 8;
    Dataset data;
    data.train = {burgers_traj(grid, 8, 13)};
    data.val = {burgers_traj(grid, 5, 14)};
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = data.train[0].snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 6;
    cfg.base_lr = 1e-3;
    cfg.rollout_len = 2;
    cfg.seed = 8;
    cfg.checkpoint_every = 2;
    cfg.checkpoint_dir = tmp.file("ckpts");
    cfg.history_path = tmp.file("history.jsonl");

    auto history = train(m, data, cfg);
    for (int e : {2, 4, 6})
        CHECK(std::filesystem::exists(tmp.file("ckpts/epoch_" + std::to_string(e) + ".psck")));
    CHECK_FALSE(std::filesystem::exists(tmp.file("ckpts/epoch_1.psck")));
    for (const auto& rec : history) {
        CHECK(rec.has_val == (rec.epoch % 2 == 0));
        if (rec.has_val) CHECK(rec.val_rmse > 0.0);
    }

    // History file: one valid JSON record per epoch, null val_rmse off-cadence.
    std::string jsonl = read_file(cfg.history_path);
    std::istringstream lines(jsonl);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        ++rows;
        CHECK(j.at("epoch") == rows);
        CHECK(j.at("val_rmse").is_null() == (rows % 2 == 1));
    }
    CHECK(rows == 6);
}

TEST_CASE("more than 10 consecutive blow-ups aborts training") {
    const int grid = 8;
    Trajectory traj = burgers_traj(grid, 8, 15);
    for (double& v : traj.data) v *= 1e160;  // Pi-block product overflows instantly
    ModelConfig mcfg = tiny_cfg(grid);
    mcfg.dt = traj.snapshot_dt();
    PeSANet m(mcfg, grid);

    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs = 50;
    cfg.base_lr = 1e-3;
    cfg.rollout_len = 2;
    cfg.seed = 9;
    CHECK_THROWS_AS(train(m, {{traj}, {}}, cfg), BlowupError);
}

TEST_CASE("train rejects degenerate datasets") {
    ModelConfig mcfg = tiny_cfg(8);
    PeSANet m(mcfg, 8);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(m, {{}, {}}, cfg), ConfigError);

    Trajectory shorty = burgers_traj(8, 2, 16);
    cfg.rollout_len = 2;  // needs R+1 = 3 snapshots
    CHECK_THROWS_AS(train(m, {{shorty}, {}}, cfg), ConfigError);

    Trajectory wrong_grid = burgers_traj(16, 5, 17);
    cfg = TrainConfig{};
    CHECK_THROWS_AS(train(m, {{wrong_grid}, {}}, cfg), ConfigError);
}

TEST_CASE("rollout_rmse matches a direct recomputation") {
    const int grid = 8;
    Trajectory traj = burgers_traj(grid, 5, 18);
    PeSANet m(tiny_cfg(grid), grid);
    double got = rollout_rmse(m, {traj});

    auto pred = rollout(m, Field(traj.snapshot(0), traj.snapshot(0) + traj.snapshot_len()),
                        static_cast<std::size_t>(traj.snapshots) - 1);
    double acc = 0.0;
    std::size_t count = 0;
    for (int t = 1; t < traj.snapshots; ++t)
        for (std::size_t i = 0; i < traj.snapshot_len(); ++i) {
            double d = pred[t][i] - traj.snapshot(t)[i];
            acc += d * d;
            ++count;
        }
    CHECK(got == doctest::Approx(std::sqrt(acc / count)).epsilon(1e-12));
}
