#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tamperlab/rng.hpp"
#include "tamperlab/types.hpp"

namespace tamperlab {

namespace detail {

// Activity-dependent multipliers on the resting heart rate and on the noise
// floor. Ordered as kAllActivities.
inline constexpr std::array<double, 7> kHrFactor = {1.00, 1.06, 1.14, 1.42, 1.68, 1.30, 1.85};
inline constexpr std::array<double, 7> kNoiseFactor = {1.00, 1.15, 1.35, 2.20, 3.00, 1.80, 3.40};

// Identity anchors (R amplitude, resting rate) are snapped to an 11x11 grid
// with jitter confined to the inner half of each cell, so any two seeds in a
// window of 121 consecutive values differ in R amplitude or RR interval by at
// least half a grid step.
inline constexpr int kGridLevels = 11;
inline constexpr double kRAmpBase = 0.90, kRAmpStep = 0.11;   // mV
inline constexpr double kRestHrBase = 55.0, kRestHrStep = 2.5; // bpm

} // namespace detail

// Deterministic subject generator. The seed picks a cell of the identity grid
// and drives all remaining morphology draws; invariant violations are
// rejected and redrawn.
inline SubjectProfile synth_subject(std::uint64_t seed) {
    const std::uint64_t cell = seed % (detail::kGridLevels * detail::kGridLevels);
    const int r_level = static_cast<int>(cell % detail::kGridLevels);
    const int hr_level = static_cast<int>(cell / detail::kGridLevels);

    Rng rng(hash_mix(seed, fnv1a("subject-profile")));

    for (int attempt = 0; attempt < 1000; ++attempt) {
        SubjectProfile p;
        const double r_jitter = rng.uniform(-0.25, 0.25) * detail::kRAmpStep;
        const double hr_jitter = rng.uniform(-0.25, 0.25) * detail::kRestHrStep;
        const double r_amp = detail::kRAmpBase + detail::kRAmpStep * r_level + r_jitter;
        const double rest_hr = detail::kRestHrBase + detail::kRestHrStep * hr_level + hr_jitter;

        p.waves[0] = {rng.uniform(0.08, 0.18), rng.uniform(0.018, 0.028), -rng.uniform(0.16, 0.22)}; // P
        p.waves[1] = {-rng.uniform(0.05, 0.15), rng.uniform(0.006, 0.010), -rng.uniform(0.030, 0.042)}; // Q
        p.waves[2] = {r_amp, rng.uniform(0.009, 0.014), 0.0};                                        // R
        p.waves[3] = {-rng.uniform(0.10, 0.35), rng.uniform(0.006, 0.010), rng.uniform(0.030, 0.042)}; // S
        p.waves[4] = {rng.uniform(0.15, 0.45), rng.uniform(0.055, 0.090), rng.uniform(0.26, 0.34)}; // T

        for (std::size_t i = 0; i < kAllActivities.size(); ++i)
            p.heart_rate_bpm[i] = std::clamp(rest_hr * detail::kHrFactor[i], 40.0, 200.0);

        p.hrv_bpm = rng.uniform(1.0, 4.0);
        const double noise_base = rng.uniform(0.010, 0.025);
        for (std::size_t i = 0; i < kAllActivities.size(); ++i)
            p.noise_mv[i] = noise_base * detail::kNoiseFactor[i];

        if (p.r_wave().amplitude_mv <= p.p_wave().amplitude_mv) continue;
        bool ok = true;
        for (const auto& w : p.waves)
            if (!(w.width_s > 0.0)) ok = false;
        for (double hr : p.heart_rate_bpm)
            if (hr < 40.0 || hr > 200.0) ok = false;
        if (!ok) continue;
        return p;
    }
    throw std::runtime_error("synth_subject: rejection budget exhausted");
}

// Gaussian-wave heartbeat model: beats on jittered RR intervals, five bumps
// per beat, slow respiratory baseline wander and white noise. Wander scales
// with the activity noise level so a zero-noise profile yields an exactly
// periodic template.
inline EcgRecord synth_record(const SubjectProfile& profile, Activity activity, double duration_s,
                              std::uint64_t seed, std::string subject_id = {}) {
    if (duration_s < 4.0) throw std::invalid_argument("duration must be at least 4 s");
    profile.validate();

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * kSampleRateHz));
    const auto act_idx = static_cast<std::size_t>(activity);
    const double hr = profile.heart_rate_bpm[act_idx];
    const double noise = profile.noise_mv[act_idx];

    Rng rng(hash_mix(seed, fnv1a(to_string(activity))));

    // Beat centers. Start half a period before the window so the first beat's
    // tail is present.
    std::vector<double> beats;
    double t = -60.0 / hr * 0.5;
    while (t < duration_s + 1.0) {
        beats.push_back(t);
        const double inst_hr = std::clamp(rng.normal(hr, profile.hrv_bpm), 40.0, 200.0);
        t += 60.0 / inst_hr;
    }

    EcgRecord rec;
    rec.subject_id = std::move(subject_id);
    rec.activity = activity;
    rec.samples.assign(n, 0.0);

    constexpr double kBeatWindow = 0.7; // seconds; covers the T wave tail
    for (double c : beats) {
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((c - kBeatWindow) * kSampleRateHz));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((c + kBeatWindow) * kSampleRateHz));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
             i < std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n)); ++i) {
            const double ti = static_cast<double>(i) / kSampleRateHz;
            double v = 0.0;
            for (const auto& w : profile.waves) {
                const double d = ti - c - w.center_s;
                v += w.amplitude_mv * std::exp(-d * d / (2.0 * w.width_s * w.width_s));
            }
            rec.samples[static_cast<std::size_t>(i)] += v;
        }
    }

    const double wander_amp = 3.0 * noise;
    const double wander_hz = rng.uniform(0.15, 0.35);
    const double wander_phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    if (wander_amp > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double ti = static_cast<double>(i) / kSampleRateHz;
            rec.samples[i] += wander_amp * std::sin(2.0 * 3.14159265358979323846 * wander_hz * ti + wander_phase);
        }
    }
    if (noise > 0.0)
        for (std::size_t i = 0; i < n; ++i) rec.samples[i] += rng.normal(0.0, noise);

    rec.validate();
    return rec;
}

} // namespace tamperlab
