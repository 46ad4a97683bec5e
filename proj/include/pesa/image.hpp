#pragma once

#include <string>

#include "pesa/io.hpp"

namespace pesa {

struct HeatmapInfo {
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false;  // min == max, uniform-gray output
};

// 8-bit binary PGM (P5), min-max normalized so the max-valued cell maps to
// 255 and the min-valued cell to 0. Returns the normalization bounds for the
// sidecar JSON. Degenerate (constant) input maps to mid-gray 128.
HeatmapInfo write_pgm_heatmap(const double* values, std::size_t height, std::size_t width,
                              const std::string& path);

std::string heatmap_sidecar_json(const HeatmapInfo& info);

}  // namespace pesa
