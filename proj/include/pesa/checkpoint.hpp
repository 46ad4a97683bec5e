#pragma once

#include <string>

#include <json.hpp>

#include "pesa/io.hpp"
#include "pesa/model.hpp"

namespace pesa {

// PSCK container: "PSCK" + version 0x01, u32-LE JSON length, JSON
// {config, grid}, u32 parameter count, then per parameter: u32 name length,
// UTF-8 name, u32 rank, u64 dims, f64-LE data. Loading rebuilds the skeleton
// from the stored config and validates every name and shape against it.
void write_checkpoint(const PeSANet& model, const std::string& path);
PeSANet read_checkpoint(const std::string& path);

// JSON <-> ModelConfig, shared by checkpoints and run configs. Parsing
// rejects unknown keys.
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace pesa
