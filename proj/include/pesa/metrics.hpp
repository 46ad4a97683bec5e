#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pesa/trajectory.hpp"

namespace pesa {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double rmse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

// Pearson correlation. Errors if both arguments are constant; returns 0 when
// exactly one is (zero covariance against zero variance).
double pcc(std::span<const double> a, std::span<const double> b);

// High correction time: sum of dt over snapshots whose PCC (flattened
// channels x space, prediction vs truth) exceeds the threshold.
double hct(std::span<const double> pred, std::span<const double> truth, std::size_t snapshots,
           std::size_t snapshot_len, double dt, double threshold = 0.8);

// Per-snapshot (t, RMSE_t), t = physical time of snapshot i.
std::vector<std::pair<double, double>> error_curve(std::span<const double> pred,
                                                   std::span<const double> truth,
                                                   std::size_t snapshots,
                                                   std::size_t snapshot_len, double dt);

struct TrajectoryEval {
    std::string id;
    double rmse = 0.0;
    double mae = 0.0;
    double hct = 0.0;
    std::vector<std::pair<double, double>> curve;
};

struct EvalReport {
    std::string checkpoint_id;
    std::string dataset_id;
    double dt = 0.0;
    std::vector<TrajectoryEval> trajectories;
    // RMSE/MAE aggregate over trajectories x time x space; HCT averages the
    // per-trajectory values.
    double aggregate_rmse = 0.0;
    double aggregate_mae = 0.0;
    double aggregate_hct = 0.0;
};

std::string report_to_json(const EvalReport& report);
std::string curves_to_csv(const EvalReport& report);

}  // namespace pesa
