#pragma once

#include <string>
#include <vector>

#include "gsam/model.hpp"

namespace gsam {

// Analytical cost of the full model at one input size. Builds the model
// structure (weights unused) and walks it, so dims and parameter counts can
// never drift from the network that actually runs.
CostReport count_macs(const ModelConfig& config, int h, int w);

struct SweepRow {
    int h = 0, w = 0;
    long long total_macs = 0;
    long long total_params = 0;
};

std::vector<SweepRow> size_sweep(const ModelConfig& config, const std::vector<std::pair<int, int>>& sizes);

std::string cost_report_to_csv(const CostReport& report);
std::string cost_report_to_json(const CostReport& report);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace gsam
