#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tamperlab/types.hpp"

namespace tamperlab {

inline std::size_t segment_hop(std::size_t window = kSegmentLen, double overlap = 0.30) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(window) * (1.0 - overlap)));
}

// Fixed-length windows with 30% overlap; trailing partial windows dropped.
inline std::vector<Segment> segment(const EcgRecord& rec, std::size_t window = kSegmentLen,
                                    double overlap = 0.30) {
    rec.validate();
    if (rec.samples.size() < window)
        throw std::invalid_argument("record shorter than one window (" +
                                    std::to_string(rec.samples.size()) + " < " +
                                    std::to_string(window) + ")");
    const std::size_t hop = segment_hop(window, overlap);
    std::vector<Segment> out;
    for (std::size_t start = 0; start + window <= rec.samples.size(); start += hop) {
        Segment s;
        s.samples.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         rec.samples.begin() + static_cast<std::ptrdiff_t>(start + window));
        s.subject_id = rec.subject_id;
        s.activity = rec.activity;
        s.start_index = start;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace tamperlab
