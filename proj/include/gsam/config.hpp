#pragma once

#include <string>

#include "gsam/model.hpp"
#include "gsam/trainer.hpp"

namespace gsam {

// Everything one run needs, loadable from a single JSON file with CLI
// overrides on top. The resolved config is echoed into the output directory
// so a run can be reproduced exactly.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string data_dir;
    std::string out_dir;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

RunConfig load_run_config(const std::string& path);   // file variant
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace gsam
