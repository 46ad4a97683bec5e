#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pesa/model.hpp"
#include "pesa/optim.hpp"
#include "pesa/trajectory.hpp"

namespace pesa {

struct TrainConfig {
    std::size_t batch_size = 8;
    std::size_t epochs = 100;
    double base_lr = 1e-3;
    std::size_t sched_interval = 20;   // optimizer steps per decay interval
    double sched_gamma = 0.985;
    std::size_t rollout_len = 2;       // R, autoregressive steps per sample
    std::uint64_t seed = 0;
    Precision precision = Precision::f64;
    std::size_t checkpoint_every = 0;  // epochs; 0 disables checkpoints/validation
    std::string checkpoint_dir;        // empty: validation only, no files
    std::string history_path;          // JSON-lines, one record per epoch

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;       // 1-based
    std::size_t opt_step = 0;    // optimizer steps completed before this epoch
    double lr = 0.0;             // step_decay at opt_step
    double train_loss = 0.0;     // epoch-averaged batch loss
    double val_rmse = 0.0;       // full-horizon rollout RMSE on validation data
    bool has_val = false;
};

using TrainHistory = std::vector<EpochRecord>;

struct Dataset {
    std::vector<Trajectory> train;
    std::vector<Trajectory> val;
};

// Autoregressive rollout training: per batch, roll the model R steps from
// each sampled window start and take the MSE over the R predicted states.
// Window sampling is without replacement per epoch, seeded. Batches that blow
// up are skipped and logged; more than 10 consecutive blow-ups is a hard
// failure.
TrainHistory train(PeSANet& model, const Dataset& data, const TrainConfig& cfg);

// Full-horizon rollout RMSE of the model against each trajectory, aggregated
// over trajectories x time x channels x space.
double rollout_rmse(const PeSANet& model, const std::vector<Trajectory>& trajectories);

std::string history_to_jsonl(const TrainHistory& history);

}  // namespace pesa
