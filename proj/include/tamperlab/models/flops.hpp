#pragma once

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "tamperlab/models/models.hpp"

namespace tamperlab::models {

struct FlopsReport {
    ModelKind kind = ModelKind::CNN;
    nn::Shape input_shape;
    std::vector<nn::LayerCost> layers;
    std::uint64_t total_macs = 0;
    std::uint64_t total_eltwise = 0;

    std::uint64_t total_flops() const { return 2 * total_macs + total_eltwise; }

    static constexpr const char* kConvention =
        "1 MAC = 2 FLOPs; element-wise ops (norms, activations, pooling, residual adds) "
        "count 1 FLOP per element; dropout is free at inference";
};

template <class T>
FlopsReport flops(const Model<T>& m) {
    FlopsReport r;
    r.kind = m.kind;
    r.input_shape = m.input_shape;
    m.net->costs(m.input_shape, r.layers);
    for (const auto& l : r.layers) {
        r.total_macs += l.macs;
        r.total_eltwise += l.eltwise;
    }
    return r;
}

inline FlopsReport flops_for(ModelKind kind, const ModelConfig& cfg) {
    // float instantiation: cheapest to build, cost model is dtype-independent
    auto m = build_model<float>(kind, cfg);
    return flops(m);
}

inline nlohmann::ordered_json to_json(const FlopsReport& r, bool include_layers = true) {
    nlohmann::ordered_json j;
    j["model"] = to_string(r.kind);
    j["input_size"] = {r.input_shape[0], r.input_shape[1]};
    j["total_macs"] = r.total_macs;
    j["total_flops"] = r.total_flops();
    j["flops_millions"] = static_cast<double>(r.total_flops()) / 1e6;
    j["convention"] = FlopsReport::kConvention;
    if (include_layers) {
        auto& layers = j["layers"] = nlohmann::ordered_json::array();
        for (const auto& l : r.layers)
            layers.push_back({{"name", l.name},
                              {"macs", l.macs},
                              {"eltwise", l.eltwise},
                              {"flops", l.flops()},
                              {"out_shape", l.out}});
    }
    return j;
}

// Text table mirroring the per-model computational-effort layout.
inline std::string flops_table(const std::vector<FlopsReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "Model" << std::setw(18) << "Input Size"
       << "FLOPs (Millions)\n";
    os << std::string(58, '-') << "\n";
    for (const auto& r : reports) {
        std::string in = std::to_string(r.input_shape[0]) + "x" + std::to_string(r.input_shape[1]);
        if (r.input_shape[1] > 1) in += " (CWT)";
        os << std::left << std::setw(24) << to_string(r.kind) << std::setw(18) << in << std::fixed
           << std::setprecision(1) << static_cast<double>(r.total_flops()) / 1e6 << "\n";
    }
    return os.str();
}

} // namespace tamperlab::models
