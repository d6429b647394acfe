#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tamperlab/rng.hpp"
#include "tamperlab/svg.hpp"
#include "tamperlab/types.hpp"

namespace tamperlab::tamper {

inline constexpr std::size_t kDefaultBlendWidth = 5;

enum class TamperStrategy { Half5050, Asym7525, ABA502525, Alternating50x10, Sporadic20, Sporadic50 };

inline constexpr std::array<TamperStrategy, 6> kAllStrategies = {
    TamperStrategy::Half5050,    TamperStrategy::Asym7525,   TamperStrategy::ABA502525,
    TamperStrategy::Alternating50x10, TamperStrategy::Sporadic20, TamperStrategy::Sporadic50};

inline const char* to_string(TamperStrategy s) {
    switch (s) {
        case TamperStrategy::Half5050: return "half5050";
        case TamperStrategy::Asym7525: return "asym7525";
        case TamperStrategy::ABA502525: return "aba";
        case TamperStrategy::Alternating50x10: return "alt50x10";
        case TamperStrategy::Sporadic20: return "sporadic20";
        case TamperStrategy::Sporadic50: return "sporadic50";
    }
    return "?";
}

inline TamperStrategy strategy_from_string(std::string_view s) {
    for (TamperStrategy t : kAllStrategies)
        if (s == to_string(t)) return t;
    throw std::invalid_argument("unknown tamper strategy: " + std::string(s));
}

enum class SpanSource : std::uint8_t { Host, Donor };

struct Span {
    std::size_t begin = 0, end = 0; // [begin, end)
    SpanSource source = SpanSource::Host;
    std::size_t size() const { return end - begin; }
};

struct TamperLayout {
    TamperStrategy strategy = TamperStrategy::Half5050;
    std::size_t length = kSegmentLen;
    std::vector<Span> spans;

    double donor_fraction() const {
        std::size_t d = 0;
        for (const auto& s : spans)
            if (s.source == SpanSource::Donor) d += s.size();
        return static_cast<double>(d) / static_cast<double>(length);
    }

    std::size_t donor_span_count() const {
        std::size_t c = 0;
        for (const auto& s : spans) c += (s.source == SpanSource::Donor);
        return c;
    }

    // spans must partition [0, length) in order
    void validate() const {
        if (spans.empty()) throw std::logic_error("layout has no spans");
        std::size_t pos = 0;
        for (const auto& s : spans) {
            if (s.begin != pos || s.end <= s.begin) throw std::logic_error("layout spans must tile the segment");
            pos = s.end;
        }
        if (pos != length) throw std::logic_error("layout spans do not cover the segment");
    }
};

// Nominal donor share for a strategy at a given segment length, derived from
// the same rounding rules make_layout uses.
inline double nominal_donor_fraction(TamperStrategy s, std::size_t length = kSegmentLen) {
    const double len = static_cast<double>(length);
    const auto frag = static_cast<double>(std::llround(0.05 * len));
    switch (s) {
        case TamperStrategy::Half5050: return (len - std::llround(0.5 * len)) / len;
        case TamperStrategy::Asym7525: return (len - std::llround(0.75 * len)) / len;
        case TamperStrategy::ABA502525: return static_cast<double>(std::llround(0.25 * len)) / len;
        case TamperStrategy::Alternating50x10: {
            const auto ten = static_cast<double>(std::llround(0.10 * len));
            const double last = len - std::llround(0.5 * len) - 4.0 * ten; // final span absorbs rounding
            return (2.0 * ten + last) / len;
        }
        case TamperStrategy::Sporadic20: return 4.0 * frag / len;
        case TamperStrategy::Sporadic50: return 10.0 * frag / len;
    }
    return 0.0;
}

namespace detail {

// Spans from an ordered list of (fraction, source): boundaries are cumulative
// sums of per-span rounded lengths; the final span absorbs the residue.
inline TamperLayout structured_layout(TamperStrategy strategy, std::size_t length,
                                      const std::vector<std::pair<double, SpanSource>>& parts) {
    TamperLayout lay;
    lay.strategy = strategy;
    lay.length = length;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::size_t sz = (i + 1 == parts.size())
                             ? length - pos
                             : static_cast<std::size_t>(std::llround(parts[i].first * static_cast<double>(length)));
        lay.spans.push_back({pos, pos + sz, parts[i].second});
        pos += sz;
    }
    lay.validate();
    return lay;
}

// Uniform placement of `count` donor fragments of `frag` samples with at
// least `gap` host samples between consecutive fragments. Sorted offsets make
// the placement valid by construction, so no retry loop is needed.
inline TamperLayout sporadic_layout(TamperStrategy strategy, std::size_t length, std::size_t count,
                                    std::size_t gap, Rng& rng) {
    const std::size_t frag = static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(length)));
    const std::size_t need = count * frag + (count - 1) * gap;
    if (need > length)
        throw std::runtime_error("cannot place donor fragments without adjacency");
    const std::size_t slack = length - need;

    std::vector<std::size_t> u(count);
    for (auto& v : u) v = static_cast<std::size_t>(rng.below(slack + 1));
    std::sort(u.begin(), u.end());

    TamperLayout lay;
    lay.strategy = strategy;
    lay.length = length;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = u[i] + i * (frag + gap);
        if (start > pos) lay.spans.push_back({pos, start, SpanSource::Host});
        lay.spans.push_back({start, start + frag, SpanSource::Donor});
        pos = start + frag;
    }
    if (pos < length) lay.spans.push_back({pos, length, SpanSource::Host});
    lay.validate();
    return lay;
}

} // namespace detail

inline TamperLayout make_layout(TamperStrategy strategy, std::size_t length, Rng& rng,
                                std::size_t blend_width = kDefaultBlendWidth) {
    if (length != kSegmentLen)
        throw std::invalid_argument("layouts are defined for 2048-sample segments");
    using S = SpanSource;
    switch (strategy) {
        case TamperStrategy::Half5050:
            return detail::structured_layout(strategy, length, {{0.5, S::Host}, {0.5, S::Donor}});
        case TamperStrategy::Asym7525:
            return detail::structured_layout(strategy, length, {{0.75, S::Host}, {0.25, S::Donor}});
        case TamperStrategy::ABA502525:
            return detail::structured_layout(strategy, length,
                                             {{0.5, S::Host}, {0.25, S::Donor}, {0.25, S::Host}});
        case TamperStrategy::Alternating50x10:
            return detail::structured_layout(strategy, length,
                                             {{0.5, S::Host},
                                              {0.1, S::Donor},
                                              {0.1, S::Host},
                                              {0.1, S::Donor},
                                              {0.1, S::Host},
                                              {0.1, S::Donor}});
        case TamperStrategy::Sporadic20:
            return detail::sporadic_layout(strategy, length, 4, blend_width, rng);
        case TamperStrategy::Sporadic50:
            return detail::sporadic_layout(strategy, length, 10, blend_width, rng);
    }
    throw std::invalid_argument("unknown strategy");
}

// Linear crossfade: out[i] = (1-a_i) prev + a_i curr, a_i = i/(W-1).
inline std::vector<double> blend_join(const std::vector<double>& prev_tail,
                                      const std::vector<double>& curr_head) {
    if (prev_tail.size() != curr_head.size()) throw std::invalid_argument("blend inputs differ in length");
    const std::size_t w = prev_tail.size();
    if (w < 2) throw std::invalid_argument("blend width must be >= 2");
    std::vector<double> out(w);
    for (std::size_t i = 0; i < w; ++i) {
        const double a = static_cast<double>(i) / static_cast<double>(w - 1);
        out[i] = (1.0 - a) * prev_tail[i] + a * curr_head[i];
    }
    return out;
}

enum class MaskLabel : std::uint8_t { Host, Donor, Blend };

struct TamperedSegment {
    std::vector<double> samples; // kSegmentLen
    std::vector<MaskLabel> mask; // kSegmentLen
    TamperStrategy strategy = TamperStrategy::Half5050;
    TamperLayout layout;
    std::string host_id, donor_id;
    Activity activity = Activity::Sitting;
    std::size_t blend_width = kDefaultBlendWidth;
};

// Copy each span from its source at the same sample indices, then crossfade
// the blend window straddling every interior junction (ceil(W/2) samples from
// the earlier span, the rest from the later one).
inline TamperedSegment compose(const TamperLayout& layout, const Segment& host, const Segment& donor,
                               std::size_t blend_width = kDefaultBlendWidth) {
    layout.validate();
    host.validate();
    donor.validate();
    if (host.samples.size() != layout.length || donor.samples.size() != layout.length)
        throw std::invalid_argument("segment length does not match layout");
    if (host.subject_id == donor.subject_id)
        throw std::invalid_argument("host and donor must be different subjects");
    if (host.activity != donor.activity)
        throw std::invalid_argument("host and donor must share the same activity");
    if (blend_width < 2 || blend_width > layout.length / 4)
        throw std::invalid_argument("unreasonable blend width");

    TamperedSegment out;
    out.strategy = layout.strategy;
    out.layout = layout;
    out.host_id = host.subject_id;
    out.donor_id = donor.subject_id;
    out.activity = host.activity;
    out.blend_width = blend_width;
    out.samples.resize(layout.length);
    out.mask.resize(layout.length);

    auto src_of = [&](SpanSource s) -> const std::vector<double>& {
        return s == SpanSource::Host ? host.samples : donor.samples;
    };

    for (const auto& sp : layout.spans) {
        const auto& src = src_of(sp.source);
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(sp.begin),
                  src.begin() + static_cast<std::ptrdiff_t>(sp.end),
                  out.samples.begin() + static_cast<std::ptrdiff_t>(sp.begin));
        std::fill(out.mask.begin() + static_cast<std::ptrdiff_t>(sp.begin),
                  out.mask.begin() + static_cast<std::ptrdiff_t>(sp.end),
                  sp.source == SpanSource::Host ? MaskLabel::Host : MaskLabel::Donor);
    }

    const std::size_t lead = (blend_width + 1) / 2; // samples taken from the earlier span
    for (std::size_t k = 0; k + 1 < layout.spans.size(); ++k) {
        if (layout.spans[k].source == layout.spans[k + 1].source) continue;
        const std::size_t j = layout.spans[k].end;
        std::size_t start = j >= lead ? j - lead : 0;
        start = std::min(start, layout.length - blend_width);
        const auto& prev_src = src_of(layout.spans[k].source);
        const auto& next_src = src_of(layout.spans[k + 1].source);
        for (std::size_t i = 0; i < blend_width; ++i) {
            const double a = static_cast<double>(i) / static_cast<double>(blend_width - 1);
            out.samples[start + i] = (1.0 - a) * prev_src[start + i] + a * next_src[start + i];
            out.mask[start + i] = MaskLabel::Blend;
        }
    }
    return out;
}

struct MaskReport {
    double host_fraction = 0.0;
    double donor_fraction = 0.0;
    double blend_fraction = 0.0;
    std::size_t donor_runs = 0; // maximal runs of pure donor samples
};

// Measured source shares; blend samples are convex mixtures so they count
// half toward each source. Throws when the shares drift more than 1% from
// the strategy's nominal composition.
inline MaskReport verify_mask(const TamperedSegment& t) {
    if (t.mask.size() != t.samples.size() || t.mask.empty())
        throw std::invalid_argument("tampered segment mask/sample size mismatch");
    const double n = static_cast<double>(t.mask.size());
    std::size_t host = 0, donor = 0, blend = 0, runs = 0;
    MaskLabel prev = MaskLabel::Host;
    for (std::size_t i = 0; i < t.mask.size(); ++i) {
        const MaskLabel m = t.mask[i];
        if (m == MaskLabel::Host) ++host;
        else if (m == MaskLabel::Donor) ++donor;
        else ++blend;
        if (m == MaskLabel::Donor && (i == 0 || prev != MaskLabel::Donor)) ++runs;
        prev = m;
    }
    MaskReport r;
    r.host_fraction = (host + 0.5 * blend) / n;
    r.donor_fraction = (donor + 0.5 * blend) / n;
    r.blend_fraction = blend / n;
    r.donor_runs = runs;

    const double nominal = nominal_donor_fraction(t.strategy, t.mask.size());
    if (std::abs(r.donor_fraction - nominal) > 0.01)
        throw std::runtime_error("mask inconsistent with strategy: donor fraction " +
                                 std::to_string(r.donor_fraction) + " vs nominal " +
                                 std::to_string(nominal));
    return r;
}

// --- sidecar / payload I/O ---

inline nlohmann::ordered_json sidecar_json(const TamperedSegment& t, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(t.strategy);
    j["seed"] = seed;
    j["host"] = t.host_id;
    j["donor"] = t.donor_id;
    j["activity"] = tamperlab::to_string(t.activity);
    j["blend_width"] = t.blend_width;
    auto& spans = j["layout"] = nlohmann::ordered_json::array();
    for (const auto& sp : t.layout.spans)
        spans.push_back({sp.begin, sp.end, sp.source == SpanSource::Host ? "A" : "B"});
    auto& rle = j["mask_rle"] = nlohmann::ordered_json::array();
    std::size_t i = 0;
    static const char* names[] = {"A", "B", "blend"};
    while (i < t.mask.size()) {
        std::size_t jx = i;
        while (jx < t.mask.size() && t.mask[jx] == t.mask[i]) ++jx;
        rle.push_back({names[static_cast<int>(t.mask[i])], jx - i});
        i = jx;
    }
    return j;
}

inline void save_tampered(const TamperedSegment& t, std::uint64_t seed,
                          const std::filesystem::path& payload_path) {
    {
        std::ofstream out(payload_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + payload_path.string());
        out.write(reinterpret_cast<const char*>(t.samples.data()),
                  static_cast<std::streamsize>(t.samples.size() * sizeof(double)));
    }
    std::filesystem::path side = payload_path;
    side.replace_extension(".json");
    std::ofstream out(side, std::ios::binary);
    out << sidecar_json(t, seed).dump(2) << "\n";
}

// Color-coded rendering: host green, donor red, blend windows amber.
inline SvgDoc render_tampered(const TamperedSegment& t, int width = 1024, int height = 256) {
    SvgDoc doc(width, height);
    const double lo = *std::min_element(t.samples.begin(), t.samples.end());
    const double hi = *std::max_element(t.samples.begin(), t.samples.end());
    const double span = hi > lo ? hi - lo : 1.0;
    const double margin = 8.0;
    auto xm = [&](std::size_t i) {
        return margin + (width - 2 * margin) * static_cast<double>(i) / static_cast<double>(t.samples.size() - 1);
    };
    auto ym = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / span; };
    static const char* colors[] = {"#2e7d32", "#c62828", "#f9a825"};

    std::size_t i = 0;
    while (i < t.mask.size()) {
        std::size_t j = i;
        while (j < t.mask.size() && t.mask[j] == t.mask[i]) ++j;
        std::vector<std::pair<double, double>> pts;
        const std::size_t from = i == 0 ? 0 : i - 1; // stitch runs together
        for (std::size_t k = from; k < j; ++k) pts.emplace_back(xm(k), ym(t.samples[k]));
        doc.polyline(pts, colors[static_cast<int>(t.mask[i])], 1.2);
        i = j;
    }
    return doc;
}

} // namespace tamperlab::tamper
