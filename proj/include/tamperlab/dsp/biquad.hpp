#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace tamperlab::dsp {

// One second-order section, direct form II transposed.
// y[n] = b0 x[n] + s1;  s1' = b1 x[n] - a1 y[n] + s2;  s2' = b2 x[n] - a2 y[n]
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::complex<double> response(double omega) const {
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }

    bool stable() const {
        // poles of z^2 + a1 z + a2 inside the unit circle
        return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
    }
};

struct BiquadCascade {
    std::vector<Biquad> sections;
    double low_hz = 0.0, high_hz = 0.0, fs = 0.0;
    int order = 0; // analog prototype order

    std::complex<double> response(double freq_hz) const {
        const double omega = 2.0 * std::numbers::pi * freq_hz / fs;
        std::complex<double> h{1.0, 0.0};
        for (const auto& s : sections) h *= s.response(omega);
        return h;
    }

    double gain_db(double freq_hz) const {
        const double m = std::abs(response(freq_hz));
        return 20.0 * std::log10(std::max(m, 1e-300));
    }

    bool stable() const {
        for (const auto& s : sections)
            if (!s.stable()) return false;
        return true;
    }
};

// Butterworth band-pass: analog low-pass prototype -> band-pass transform ->
// bilinear transform with cutoff pre-warping. Each section carries one zero
// at z=+1 and one at z=-1, so DC and Nyquist gain are identically zero.
inline BiquadCascade design_bandpass(int order, double low_hz, double high_hz, double fs) {
    if (order < 1) throw std::invalid_argument("filter order must be >= 1");
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
        throw std::invalid_argument("cutoffs must satisfy 0 < low < high < fs/2");

    using cd = std::complex<double>;
    const double pi = std::numbers::pi;

    const double w1 = 2.0 * fs * std::tan(pi * low_hz / fs);
    const double w2 = 2.0 * fs * std::tan(pi * high_hz / fs);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // Analog band-pass poles from each prototype pole p: roots of
    // s^2 - (bw p) s + w0^2 = 0. Conjugates are implied; only Im(p) >= 0
    // prototype poles are expanded.
    std::vector<std::pair<cd, cd>> pole_pairs; // (pole, its section partner)
    for (int k = 1; k <= order; ++k) {
        const double theta = pi * (2.0 * k + order - 1.0) / (2.0 * order);
        const cd p = std::polar(1.0, theta);
        if (p.imag() < -1e-12) continue;
        const cd bp = bw * p * 0.5;
        const cd disc = std::sqrt(bp * bp - cd(w0 * w0, 0.0));
        const cd s_a = bp + disc;
        const cd s_b = bp - disc;
        if (std::abs(p.imag()) <= 1e-12) {
            // real prototype pole (odd orders): its two band-pass roots share a section
            pole_pairs.emplace_back(s_a, s_b);
        } else {
            pole_pairs.emplace_back(s_a, std::conj(s_a));
            pole_pairs.emplace_back(s_b, std::conj(s_b));
        }
    }

    BiquadCascade cas;
    cas.low_hz = low_hz;
    cas.high_hz = high_hz;
    cas.fs = fs;
    cas.order = order;

    const double k_bl = 2.0 * fs;
    for (const auto& [sa, sb] : pole_pairs) {
        const cd za = (k_bl + sa) / (k_bl - sa);
        const cd zb = (k_bl + sb) / (k_bl - sb);
        Biquad q;
        q.b0 = 1.0;
        q.b1 = 0.0;
        q.b2 = -1.0; // zeros at z = +1 and z = -1
        q.a1 = -(za + zb).real();
        q.a2 = (za * zb).real();
        cas.sections.push_back(q);
    }

    // Normalize to unit gain at the (warped) center frequency, split evenly
    // across sections.
    const double f_center = fs / pi * std::atan(w0 / (2.0 * fs));
    const double g_total = std::abs(cas.response(f_center));
    const double g_section = std::pow(1.0 / g_total, 1.0 / static_cast<double>(cas.sections.size()));
    for (auto& s : cas.sections) {
        s.b0 *= g_section;
        s.b1 *= g_section;
        s.b2 *= g_section;
    }

    if (!cas.stable()) throw std::runtime_error("designed filter is unstable");
    return cas;
}

namespace detail {

// Steady-state DF2T state for a unit-step input; used to suppress start-up
// transients in zero-phase filtering.
inline std::pair<double, double> step_state(const Biquad& q) {
    const double y = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double s2 = q.b2 - q.a2 * y;
    const double s1 = q.b1 - q.a1 * y + s2;
    return {s1, s2};
}

inline void sosfilt_inplace(const BiquadCascade& cas, std::vector<double>& x, bool use_step_state) {
    double level = x.empty() ? 0.0 : x.front();
    for (const auto& q : cas.sections) {
        double s1 = 0.0, s2 = 0.0;
        if (use_step_state) {
            auto [z1, z2] = step_state(q);
            s1 = z1 * level;
            s2 = z2 * level;
        }
        for (double& v : x) {
            const double y = q.b0 * v + s1;
            s1 = q.b1 * v - q.a1 * y + s2;
            s2 = q.b2 * v - q.a2 * y;
            v = y;
        }
        level *= (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    }
}

} // namespace detail

// Single forward pass (introduces phase delay).
inline std::vector<double> filter_forward(const std::vector<double>& x, const BiquadCascade& cas) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to filter");
    std::vector<double> y = x;
    detail::sosfilt_inplace(cas, y, true);
    return y;
}

// Forward-backward filtering: zero phase, squared magnitude response.
// Odd-reflection padding plus step-matched initial state at both ends.
inline std::vector<double> filter_zero_phase(const std::vector<double>& x, const BiquadCascade& cas) {
    const std::size_t min_len = 3 * static_cast<std::size_t>(2 * cas.sections.size());
    if (x.size() < std::max<std::size_t>(min_len, 4))
        throw std::invalid_argument("input too short for zero-phase filtering");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to filter");

    const std::size_t pad = std::min<std::size_t>(x.size() - 1, 256);
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 2; i <= pad + 1; ++i) ext.push_back(2.0 * x.back() - x[x.size() - i]);

    detail::sosfilt_inplace(cas, ext, true);
    std::reverse(ext.begin(), ext.end());
    detail::sosfilt_inplace(cas, ext, true);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

inline nlohmann::ordered_json to_json(const BiquadCascade& cas) {
    nlohmann::ordered_json j;
    j["type"] = "butterworth-bandpass";
    j["order"] = cas.order;
    j["low_hz"] = cas.low_hz;
    j["high_hz"] = cas.high_hz;
    j["fs"] = cas.fs;
    auto& secs = j["sections"] = nlohmann::ordered_json::array();
    for (const auto& s : cas.sections)
        secs.push_back({{"b", {s.b0, s.b1, s.b2}}, {"a", {1.0, s.a1, s.a2}}});
    return j;
}

} // namespace tamperlab::dsp
