#include "pesa/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace pesa {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size())
        throw MetricError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
    if (a.empty()) throw MetricError(std::string(op) + ": empty input");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - truth[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

double pcc(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b, "pcc");
    if (a.size() < 2) throw MetricError("pcc: need at least 2 samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 && vb == 0.0) throw MetricError("pcc: undefined correlation (both constant)");
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / (std::sqrt(va) * std::sqrt(vb));
}

double hct(std::span<const double> pred, std::span<const double> truth, std::size_t snapshots,
           std::size_t snapshot_len, double dt, double threshold) {
    check_lengths(pred, truth, "hct");
    if (pred.size() != snapshots * snapshot_len)
        throw MetricError("hct: data length does not match snapshots * snapshot_len");
    double total = 0.0;
    for (std::size_t t = 0; t < snapshots; ++t) {
        double corr = pcc(pred.subspan(t * snapshot_len, snapshot_len),
                          truth.subspan(t * snapshot_len, snapshot_len));
        if (corr > threshold) total += dt;
    }
    return total;
}

std::vector<std::pair<double, double>> error_curve(std::span<const double> pred,
                                                   std::span<const double> truth,
                                                   std::size_t snapshots,
                                                   std::size_t snapshot_len, double dt) {
    check_lengths(pred, truth, "error_curve");
    if (pred.size() != snapshots * snapshot_len)
        throw MetricError("error_curve: data length does not match snapshots * snapshot_len");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(snapshots);
    for (std::size_t t = 0; t < snapshots; ++t)
        curve.emplace_back(static_cast<double>(t) * dt,
                           rmse(pred.subspan(t * snapshot_len, snapshot_len),
                                truth.subspan(t * snapshot_len, snapshot_len)));
    return curve;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j = {{"checkpoint", report.checkpoint_id},
                        {"dataset", report.dataset_id},
                        {"dt", report.dt},
                        {"aggregate",
                         {{"rmse", report.aggregate_rmse},
                          {"mae", report.aggregate_mae},
                          {"hct", report.aggregate_hct}}}};
    j["trajectories"] = nlohmann::json::array();
    for (const auto& t : report.trajectories) {
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& [time, err] : t.curve) curve.push_back({{"t", time}, {"rmse", err}});
        j["trajectories"].push_back({{"id", t.id},
                                     {"rmse", t.rmse},
                                     {"mae", t.mae},
                                     {"hct", t.hct},
                                     {"curve", curve}});
    }
    return j.dump(2);
}

std::string curves_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "t";
    for (const auto& t : report.trajectories) out << ",rmse_" << t.id;
    out << "\n";
    std::size_t rows = 0;
    for (const auto& t : report.trajectories) rows = std::max(rows, t.curve.size());
    for (std::size_t r = 0; r < rows; ++r) {
        double tval = 0.0;
        for (const auto& t : report.trajectories)
            if (r < t.curve.size()) {
                tval = t.curve[r].first;
                break;
            }
        out << tval;
        for (const auto& t : report.trajectories) {
            out << ",";
            if (r < t.curve.size()) out << t.curve[r].second;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace pesa
