#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "drn/puzzle.hpp"
#include "drn/training.hpp"

namespace drn {

using json = nlohmann::ordered_json;

// JSON <-> config structs. Parsing is strict: unknown fields raise ValueError
// naming the field, so typos in config files fail fast instead of silently
// taking defaults. Missing fields do take defaults (flag > file > default).
json to_json(const ModelConfig& m);
json to_json(const DataConfig& d);
json to_json(const LossConfig& l);
json to_json(const OptimizerConfig& o);
json to_json(const ExperimentConfig& c);
json to_json(const puzzles::GeneratorConfig& g);
json to_json(const Metrics& m);
json to_json(const std::vector<AblationRow>& rows);

ModelConfig model_config_from_json(const json& j);
DataConfig data_config_from_json(const json& j);
LossConfig loss_config_from_json(const json& j);
OptimizerConfig optimizer_config_from_json(const json& j);
ExperimentConfig experiment_config_from_json(const json& j);
puzzles::GeneratorConfig generator_config_from_json(const json& j);

ExperimentConfig load_experiment_config(const std::string& path);
puzzles::GeneratorConfig load_generator_config(const std::string& path);

// FNV-1a over the canonical dump; stable across runs.
std::string config_hash(const json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace drn
