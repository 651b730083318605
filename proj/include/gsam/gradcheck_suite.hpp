#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gsam/gradcheck.hpp"

namespace gsam {

struct SuiteEntry {
    std::string name;
    GradCheckReport report;
};

// Finite-difference vs analytic gradients for every layer type: plain,
// strided, grouped, depthwise and dilated (r = rates) convolutions, linear,
// layer/channel norm, attention, PEG, all nine adapter variants, the CNN
// encoder and a tiny end-to-end model. 64-bit, central differences.
std::vector<SuiteEntry> run_gradcheck_suite(uint64_t seed = 7);

// Worst error across the suite.
double suite_max_error(const std::vector<SuiteEntry>& entries);

}  // namespace gsam
