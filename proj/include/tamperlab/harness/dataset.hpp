#pragma once

#include <cstdlib>
#include <map>
#include <optional>

#include "tamperlab/dsp/biquad.hpp"
#include "tamperlab/dsp/cwt.hpp"
#include "tamperlab/dsp/normalize.hpp"
#include "tamperlab/nn/tensor.hpp"
#include "tamperlab/segmentation.hpp"
#include "tamperlab/synth.hpp"
#include "tamperlab/tamper/tamper.hpp"

namespace tamperlab::harness {

enum class Preprocessing { Raw1D, Cwt };

inline const char* to_string(Preprocessing p) { return p == Preprocessing::Raw1D ? "raw1d" : "cwt"; }

inline Preprocessing preprocessing_from_string(std::string_view s) {
    if (s == "raw1d") return Preprocessing::Raw1D;
    if (s == "cwt") return Preprocessing::Cwt;
    throw std::invalid_argument("unknown preprocessing: " + std::string(s));
}

// Geometry shared by input preparation and the model builders: an integer
// time pool factor and a scaled CWT bin count.
struct InputScaling {
    std::int64_t pool = 1;
    std::int64_t cwt_bins = dsp::kDefaultScales;

    static InputScaling from_scale(double scale) {
        InputScaling s;
        s.pool = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(1.0 / scale)), 1, 32);
        s.cwt_bins = std::max<std::int64_t>(8, std::llround(96.0 * scale));
        return s;
    }
};

namespace detail {

inline std::vector<double> mean_pool(const std::vector<double>& x, std::int64_t pool) {
    if (pool <= 1) return x;
    const std::size_t n = x.size() / static_cast<std::size_t>(pool);
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::int64_t p = 0; p < pool; ++p) s += x[t * static_cast<std::size_t>(pool) + static_cast<std::size_t>(p)];
        out[t] = s / static_cast<double>(pool);
    }
    return out;
}

inline std::uint64_t bytes_hash(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Scalogram column pooling + time pooling for scaled model inputs; an
// optional on-disk cache keyed by the input bytes (ECG_TAMPERLAB_CACHE).
inline nn::Tensor<float> prepare_input(const std::vector<double>& samples, Preprocessing prep,
                                       const InputScaling& scaling) {
    if (prep == Preprocessing::Raw1D) {
        const auto pooled = detail::mean_pool(samples, scaling.pool);
        nn::Tensor<float> t({static_cast<std::int64_t>(pooled.size()), 1});
        for (std::size_t i = 0; i < pooled.size(); ++i) t.v[i] = static_cast<float>(pooled[i]);
        return t;
    }

    const char* cache_dir = std::getenv("ECG_TAMPERLAB_CACHE");
    std::filesystem::path cache_file;
    if (cache_dir && *cache_dir) {
        const std::uint64_t key =
            detail::bytes_hash(samples.data(), samples.size() * sizeof(double),
                               hash_mix(static_cast<std::uint64_t>(scaling.pool),
                                        static_cast<std::uint64_t>(scaling.cwt_bins)));
        char name[32];
        std::snprintf(name, sizeof name, "%016llx.scg", static_cast<unsigned long long>(key));
        cache_file = std::filesystem::path(cache_dir) / name;
        if (std::filesystem::exists(cache_file)) {
            const auto sg = dsp::load_scalogram(cache_file);
            nn::Tensor<float> t({static_cast<std::int64_t>(sg.time), static_cast<std::int64_t>(sg.scales)});
            for (std::size_t i = 0; i < sg.values.size(); ++i) t.v[i] = static_cast<float>(sg.values[i]);
            return t;
        }
    }

    const auto sg = dsp::cwt(samples, static_cast<int>(scaling.cwt_bins));
    const std::size_t tout = sg.time / static_cast<std::size_t>(scaling.pool);
    dsp::Scalogram pooled;
    pooled.time = tout;
    pooled.scales = sg.scales;
    pooled.freq_hz = sg.freq_hz;
    pooled.values.assign(tout * sg.scales, 0.0);
    for (std::size_t t = 0; t < tout; ++t)
        for (std::size_t p = 0; p < static_cast<std::size_t>(scaling.pool); ++p)
            for (std::size_t j = 0; j < sg.scales; ++j)
                pooled.values[t * sg.scales + j] +=
                    sg.values[(t * static_cast<std::size_t>(scaling.pool) + p) * sg.scales + j];
    const double inv = 1.0 / static_cast<double>(scaling.pool);
    for (auto& v : pooled.values) v *= inv;

    if (!cache_file.empty()) {
        dsp::save_scalogram(pooled, cache_file);
    }
    nn::Tensor<float> t({static_cast<std::int64_t>(pooled.time), static_cast<std::int64_t>(pooled.scales)});
    for (std::size_t i = 0; i < pooled.values.size(); ++i) t.v[i] = static_cast<float>(pooled.values[i]);
    return t;
}

// -------------------------------------------------------------- detection

struct DetectionItem {
    nn::Tensor<float> input;
    int label = 0; // 0 clean, 1 tampered
    std::string subject;
    Activity activity = Activity::Sitting;
};

struct DetectionDataset {
    std::vector<DetectionItem> items;
    tamper::TamperStrategy strategy = tamper::TamperStrategy::Half5050;
    Preprocessing prep = Preprocessing::Raw1D;
};

// Balanced clean/tampered dataset. Records are band-pass filtered, cut into
// overlapping segments and min-max normalized; every tampered item merges a
// host with a same-activity donor from another subject.
inline DetectionDataset build_detection_dataset(const std::vector<EcgRecord>& records,
                                                tamper::TamperStrategy strategy, Preprocessing prep,
                                                std::uint64_t seed, const InputScaling& scaling,
                                                std::size_t blend_width = tamper::kDefaultBlendWidth) {
    const auto filt = dsp::design_bandpass(2, 0.5, 100.0, kSampleRateHz);

    std::vector<Segment> segments;
    for (const auto& rec : records) {
        EcgRecord f = rec;
        f.samples = dsp::filter_zero_phase(rec.samples, filt);
        for (auto& s : segment(f)) {
            dsp::min_max_normalize_inplace(s.samples);
            segments.push_back(std::move(s));
        }
    }

    // same-activity donors from another subject must exist for every segment
    std::map<Activity, std::vector<std::size_t>> by_activity;
    for (std::size_t i = 0; i < segments.size(); ++i)
        by_activity[segments[i].activity].push_back(i);

    Rng rng(hash_mix(seed, fnv1a("detection-dataset")));
    DetectionDataset ds;
    ds.strategy = strategy;
    ds.prep = prep;
    ds.items.reserve(2 * segments.size());

    for (const auto& seg : segments) {
        DetectionItem item;
        item.input = prepare_input(seg.samples, prep, scaling);
        item.label = 0;
        item.subject = seg.subject_id;
        item.activity = seg.activity;
        ds.items.push_back(std::move(item));
    }

    for (const auto& host : segments) {
        const auto& pool = by_activity[host.activity];
        std::vector<std::size_t> candidates;
        for (std::size_t idx : pool)
            if (segments[idx].subject_id != host.subject_id) candidates.push_back(idx);
        if (candidates.empty())
            throw std::runtime_error("insufficient subjects: no same-activity donor for subject " +
                                     host.subject_id);
        const auto& donor = segments[candidates[rng.below(candidates.size())]];
        const auto layout = tamper::make_layout(strategy, kSegmentLen, rng, blend_width);
        const auto tampered = tamper::compose(layout, host, donor, blend_width);

        DetectionItem item;
        item.input = prepare_input(tampered.samples, prep, scaling);
        item.label = 1;
        item.subject = host.subject_id;
        item.activity = host.activity;
        ds.items.push_back(std::move(item));
    }
    return ds;
}

// -------------------------------------------------------------- pairs

struct PairItem {
    std::size_t a = 0, b = 0; // indices into the pool
    int label = 0;            // 1 same person, 0 different
};

struct PairDataset {
    std::vector<nn::Tensor<float>> pool;
    std::vector<std::string> pool_subject;
    std::vector<Activity> pool_activity;
    std::vector<PairItem> items;
};

// Verification pairs: positives are the same subject in different
// activities, negatives different subjects in the same activity. Segments
// are filtered but NOT normalized, preserving inter-subject amplitude cues.
inline PairDataset build_pair_dataset(const std::vector<EcgRecord>& records, std::uint64_t seed,
                                      Preprocessing prep, const InputScaling& scaling,
                                      std::size_t max_pairs_per_class = 0) {
    const auto filt = dsp::design_bandpass(2, 0.5, 100.0, kSampleRateHz);

    PairDataset ds;
    std::vector<Segment> segments;
    for (const auto& rec : records) {
        EcgRecord f = rec;
        f.samples = dsp::filter_zero_phase(rec.samples, filt);
        for (auto& s : segment(f)) segments.push_back(std::move(s));
    }
    if (segments.size() < 4) throw std::runtime_error("insufficient data for pair construction");

    ds.pool.reserve(segments.size());
    for (const auto& s : segments) {
        ds.pool.push_back(prepare_input(s.samples, prep, scaling));
        ds.pool_subject.push_back(s.subject_id);
        ds.pool_activity.push_back(s.activity);
    }

    std::vector<PairItem> positives, negatives;
    for (std::size_t i = 0; i < segments.size(); ++i)
        for (std::size_t j = i + 1; j < segments.size(); ++j) {
            const bool same_subj = segments[i].subject_id == segments[j].subject_id;
            const bool same_act = segments[i].activity == segments[j].activity;
            if (same_subj && !same_act) positives.push_back({i, j, 1});
            else if (!same_subj && same_act) negatives.push_back({i, j, 0});
        }
    if (positives.empty() || negatives.empty())
        throw std::runtime_error("insufficient data: need >=2 subjects with >=2 activities each");

    Rng rng(hash_mix(seed, fnv1a("pair-dataset")));
    auto shuffle = [&rng](std::vector<PairItem>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
    };
    shuffle(positives);
    shuffle(negatives);

    std::size_t n = std::min(positives.size(), negatives.size());
    if (max_pairs_per_class > 0) n = std::min(n, max_pairs_per_class);
    ds.items.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.items.push_back(positives[i]);
        ds.items.push_back(negatives[i]);
    }
    return ds;
}

} // namespace tamperlab::harness
