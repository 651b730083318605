#include "gsam/macs.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace gsam {

using nlohmann::json;

CostReport count_macs(const ModelConfig& config, int h, int w) {
    const GsamModel model(config, /*init_seed=*/0);
    return model.cost_report(h, w);
}

std::vector<SweepRow> size_sweep(const ModelConfig& config,
                                 const std::vector<std::pair<int, int>>& sizes) {
    if (sizes.empty()) throw std::invalid_argument("size_sweep: no sizes");
    const GsamModel model(config, /*init_seed=*/0);
    std::vector<SweepRow> rows;
    rows.reserve(sizes.size());
    for (const auto& [sh, sw] : sizes) {
        const CostReport r = model.cost_report(sh, sw);
        rows.push_back({sh, sw, r.total_macs, r.total_params});
    }
    return rows;
}

std::string cost_report_to_csv(const CostReport& report) {
    std::ostringstream os;
    os << "# " << report.note << "\n";
    os << "layer,kind,input_dims,macs,params\n";
    for (const CostEntry& e : report.entries) {
        os << e.name << "," << e.kind << ",";
        for (size_t i = 0; i < e.input_dims.size(); ++i) os << (i ? "x" : "") << e.input_dims[i];
        os << "," << e.macs << "," << e.params << "\n";
    }
    os << "total,,," << report.total_macs << "," << report.total_params << "\n";
    return os.str();
}

std::string cost_report_to_json(const CostReport& report) {
    json j;
    j["note"] = report.note;
    j["total_macs"] = report.total_macs;
    j["total_params"] = report.total_params;
    json entries = json::array();
    for (const CostEntry& e : report.entries) {
        json je;
        je["name"] = e.name;
        je["kind"] = e.kind;
        je["input_dims"] = e.input_dims;
        je["macs"] = e.macs;
        je["params"] = e.params;
        entries.push_back(je);
    }
    j["entries"] = entries;
    return j.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "size_h,size_w,total_macs,total_params\n";
    for (const SweepRow& r : rows) {
        os << r.h << "," << r.w << "," << r.total_macs << "," << r.total_params << "\n";
    }
    return os.str();
}

}  // namespace gsam
