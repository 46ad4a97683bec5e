#include "pesa/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "pesa/checkpoint.hpp"
#include "pesa/rng.hpp"

namespace pesa {

void TrainConfig::validate() const {
    if (rollout_len < 1) throw ConfigError("rollout_len (R) must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (base_lr <= 0.0) throw ConfigError("base_lr must be positive");
    if (sched_gamma <= 0.0 || sched_gamma > 1.0)
        throw ConfigError("sched_gamma must be in (0, 1]");
    if (sched_interval < 1) throw ConfigError("sched_interval must be >= 1");
}

namespace {

struct Window {
    std::size_t traj;
    std::size_t start;
};

}  // namespace

double rollout_rmse(const PeSANet& model, const std::vector<Trajectory>& trajectories) {
    double sq_sum = 0.0;
    std::size_t count = 0;
    for (const auto& traj : trajectories) {
        auto pred = rollout(model, Field(traj.snapshot(0), traj.snapshot(0) + traj.snapshot_len()),
                            static_cast<std::size_t>(traj.snapshots) - 1);
        for (int t = 1; t < traj.snapshots; ++t) {
            const double* truth = traj.snapshot(t);
            const auto& p = pred[static_cast<std::size_t>(t)];
            for (std::size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - truth[i];
                sq_sum += d * d;
            }
            count += p.size();
        }
    }
    if (count == 0) throw ConfigError("rollout_rmse: no snapshots to compare");
    return std::sqrt(sq_sum / static_cast<double>(count));
}

std::string history_to_jsonl(const TrainHistory& history) {
    std::string out;
    for (const auto& rec : history) {
        nlohmann::json j = {{"epoch", rec.epoch},
                            {"opt_step", rec.opt_step},
                            {"lr", rec.lr},
                            {"train_loss", rec.train_loss}};
        if (rec.has_val)
            j["val_rmse"] = rec.val_rmse;
        else
            j["val_rmse"] = nullptr;
        out += j.dump();
        out += '\n';
    }
    return out;
}

TrainHistory train(PeSANet& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train.empty()) throw ConfigError("train: empty training set");
    const std::size_t R = cfg.rollout_len;
    const std::size_t c = model.config().state_channels;
    const std::size_t n = model.grid();

    std::vector<Window> windows;
    for (std::size_t ti = 0; ti < data.train.size(); ++ti) {
        const auto& traj = data.train[ti];
        if (traj.snapshot_len() != c * n * n)
            throw ConfigError("train: trajectory " + std::to_string(ti) +
                              " does not match the model grid");
        if (static_cast<std::size_t>(traj.snapshots) < R + 1)
            throw ConfigError("train: trajectory " + std::to_string(ti) + " is shorter than R+1");
        for (std::size_t s = 0; s + R < static_cast<std::size_t>(traj.snapshots); ++s)
            windows.push_back({ti, s});
    }

    Precision prev_precision = current_precision();
    set_precision(cfg.precision);

    LrSchedule schedule{cfg.base_lr, cfg.sched_interval, cfg.sched_gamma};
    AdamState adam;
    Rng rng(cfg.seed);
    TrainHistory history;
    std::size_t opt_step = 0;
    int consecutive_blowups = 0;

    try {
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            // Fisher-Yates with the run RNG: without-replacement order per epoch.
            for (std::size_t i = windows.size(); i > 1; --i)
                std::swap(windows[i - 1], windows[rng.index(i)]);

            EpochRecord rec;
            rec.epoch = epoch;
            rec.opt_step = opt_step;
            rec.lr = step_decay(schedule, opt_step);

            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t off = 0; off < windows.size(); off += cfg.batch_size) {
                std::size_t bs = std::min(cfg.batch_size, windows.size() - off);
                Tensor batch_loss;
                try {
                    for (std::size_t b = 0; b < bs; ++b) {
                        const Window& win = windows[off + b];
                        const auto& traj = data.train[win.traj];
                        Tensor state = Tensor::from(
                            {c, n, n}, Field(traj.snapshot(static_cast<int>(win.start)),
                                             traj.snapshot(static_cast<int>(win.start)) +
                                                 traj.snapshot_len()));
                        Tensor sample_loss;
                        for (std::size_t r = 1; r <= R; ++r) {
                            state = model.step(state);
                            Tensor truth = Tensor::from(
                                {c, n, n},
                                Field(traj.snapshot(static_cast<int>(win.start + r)),
                                      traj.snapshot(static_cast<int>(win.start + r)) +
                                          traj.snapshot_len()));
                            Tensor l = mse(state, truth);
                            sample_loss = r == 1 ? l : add(sample_loss, l);
                        }
                        batch_loss = b == 0 ? sample_loss : add(batch_loss, sample_loss);
                    }
                } catch (const BlowupError&) {
                    if (++consecutive_blowups > 10)
                        throw BlowupError("train: more than 10 consecutive blow-ups", opt_step);
                    continue;  // skip this batch
                }
                consecutive_blowups = 0;
                batch_loss = scale(batch_loss, 1.0 / static_cast<double>(bs * R));

                for (auto& p : model.params()) p.value.zero_grad();
                backward(batch_loss);
                double lr = step_decay(schedule, opt_step);
                adam_step(model.params(), adam, lr);
                ++opt_step;

                loss_sum += batch_loss.item();
                ++batches;
            }
            rec.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches)
                                         : std::numeric_limits<double>::quiet_NaN();

            if (cfg.checkpoint_every > 0 &&
                (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs)) {
                if (!data.val.empty()) {
                    rec.val_rmse = rollout_rmse(model, data.val);
                    rec.has_val = true;
                }
                if (!cfg.checkpoint_dir.empty()) {
                    std::filesystem::create_directories(cfg.checkpoint_dir);
                    write_checkpoint(model, cfg.checkpoint_dir + "/epoch_" +
                                                std::to_string(epoch) + ".psck");
                }
            }
            history.push_back(rec);
        }
    } catch (...) {
        set_precision(prev_precision);
        throw;
    }
    set_precision(prev_precision);

    if (!cfg.history_path.empty()) atomic_write_file(cfg.history_path, history_to_jsonl(history));
    return history;
}

}  // namespace pesa
