#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tamperlab/types.hpp"

namespace tamperlab::dsp {

// Per-segment min-max scaling to [0, 1]. A constant segment maps to all
// zeros rather than dividing by zero.
inline void min_max_normalize_inplace(std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("empty input to normalization");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to normalization");
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }
    const double inv = 1.0 / (mx - mn);
    for (double& v : x) v = (v - mn) * inv;
}

inline Segment min_max_normalize(const Segment& seg) {
    seg.validate();
    Segment out = seg;
    min_max_normalize_inplace(out.samples);
    return out;
}

} // namespace tamperlab::dsp
