#pragma once

#include <cstdint>
#include <stdexcept>

namespace tamperlab::harness {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::int64_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

    static Metrics from_confusion(const ConfusionCounts& c) {
        if (c.total() == 0) throw std::invalid_argument("empty evaluation set");
        Metrics m;
        m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
        m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
        const double denom = m.precision + m.recall;
        m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
        return m;
    }
};

} // namespace tamperlab::harness
