#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tamperlab {

inline constexpr int kSampleRateHz = 512;
inline constexpr std::size_t kSegmentLen = 2048; // 4 s at 512 Hz

enum class Activity { Sitting, Standing, Bending, Stairs, Jumping, Walking, Running };

inline constexpr std::array<Activity, 7> kAllActivities = {
    Activity::Sitting, Activity::Standing, Activity::Bending, Activity::Stairs,
    Activity::Jumping, Activity::Walking,  Activity::Running};

inline const char* to_string(Activity a) {
    switch (a) {
        case Activity::Sitting: return "sitting";
        case Activity::Standing: return "standing";
        case Activity::Bending: return "bending";
        case Activity::Stairs: return "stairs";
        case Activity::Jumping: return "jumping";
        case Activity::Walking: return "walking";
        case Activity::Running: return "running";
    }
    return "?";
}

inline Activity activity_from_string(std::string_view s) {
    for (Activity a : kAllActivities)
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown activity: " + std::string(s));
}

struct EcgRecord {
    std::string subject_id;
    Activity activity = Activity::Sitting;
    int sample_rate = kSampleRateHz;
    std::vector<double> samples; // millivolts, arbitrary offset

    void validate() const {
        if (sample_rate != kSampleRateHz)
            throw std::invalid_argument("unsupported sample rate: " + std::to_string(sample_rate));
        if (samples.empty()) throw std::invalid_argument("record has no samples");
        for (double v : samples)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample in record");
    }
};

struct Segment {
    std::vector<double> samples; // exactly kSegmentLen
    std::string subject_id;
    Activity activity = Activity::Sitting;
    std::size_t start_index = 0; // offset into the source record

    void validate() const {
        if (samples.size() != kSegmentLen)
            throw std::invalid_argument("segment length must be 2048, got " +
                                        std::to_string(samples.size()));
        for (double v : samples)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample in segment");
    }
};

// One Gaussian bump of the five-wave heartbeat template.
struct WaveParams {
    double amplitude_mv = 0.0;
    double width_s = 0.01;  // Gaussian sigma
    double center_s = 0.0;  // offset from the R peak
};

struct SubjectProfile {
    // P, Q, R, S, T in that order.
    std::array<WaveParams, 5> waves{};
    std::array<double, 7> heart_rate_bpm{}; // indexed by Activity
    double hrv_bpm = 0.0;                   // std of the instantaneous rate
    std::array<double, 7> noise_mv{};       // white-noise sigma per activity

    const WaveParams& p_wave() const { return waves[0]; }
    const WaveParams& r_wave() const { return waves[2]; }

    double heart_rate(Activity a) const { return heart_rate_bpm[static_cast<std::size_t>(a)]; }
    double noise(Activity a) const { return noise_mv[static_cast<std::size_t>(a)]; }

    void validate() const {
        if (!(r_wave().amplitude_mv > p_wave().amplitude_mv))
            throw std::invalid_argument("profile requires R amplitude > P amplitude");
        for (const auto& w : waves)
            if (!(w.width_s > 0.0)) throw std::invalid_argument("wave width must be positive");
        for (double hr : heart_rate_bpm)
            if (hr < 40.0 || hr > 200.0)
                throw std::invalid_argument("heart rate out of [40, 200] bpm");
    }

    // Flat parameter vector; used by tests to measure subject separation.
    std::vector<double> parameter_vector() const {
        std::vector<double> v;
        for (const auto& w : waves) {
            v.push_back(w.amplitude_mv);
            v.push_back(w.width_s);
            v.push_back(w.center_s);
        }
        for (double hr : heart_rate_bpm) v.push_back(hr);
        v.push_back(hrv_bpm);
        for (double n : noise_mv) v.push_back(n);
        return v;
    }
};

} // namespace tamperlab
