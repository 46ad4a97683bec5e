#include "pesa/image.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace pesa {

HeatmapInfo write_pgm_heatmap(const double* values, std::size_t height, std::size_t width,
                              const std::string& path) {
    if (height == 0 || width == 0) throw IoError("write_pgm_heatmap: empty image");
    const std::size_t n = height * width;
    HeatmapInfo info;
    info.min = values[0];
    info.max = values[0];
    for (std::size_t i = 1; i < n; ++i) {
        info.min = std::min(info.min, values[i]);
        info.max = std::max(info.max, values[i]);
    }
    info.degenerate = info.min == info.max;

    std::string bytes = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    bytes.reserve(bytes.size() + n);
    const double span = info.max - info.min;
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char px = 128;
        if (!info.degenerate) {
            double v = (values[i] - info.min) / span * 255.0;
            px = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
        bytes.push_back(static_cast<char>(px));
    }
    atomic_write_file(path, bytes);
    return info;
}

std::string heatmap_sidecar_json(const HeatmapInfo& info) {
    return nlohmann::json{{"min", info.min}, {"max", info.max}, {"degenerate", info.degenerate}}
        .dump();
}

}  // namespace pesa
