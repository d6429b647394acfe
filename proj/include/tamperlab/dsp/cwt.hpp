#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tamperlab/dsp/fft.hpp"
#include "tamperlab/svg.hpp"
#include "tamperlab/types.hpp"

namespace tamperlab::dsp {

inline constexpr int kDefaultScales = 96;
inline constexpr double kMorletOmega0 = 6.0;

// Time-major magnitude scalogram: value(t, j) with j indexing scale bins of
// strictly increasing center frequency.
struct Scalogram {
    std::size_t time = 0;
    std::size_t scales = 0;
    std::vector<double> values;   // time * scales, row-major
    std::vector<double> freq_hz;  // per scale bin, strictly increasing
    std::vector<std::size_t> edge_width; // per bin: samples at each end inside the wavelet cone

    double& at(std::size_t t, std::size_t j) { return values[t * scales + j]; }
    double at(std::size_t t, std::size_t j) const { return values[t * scales + j]; }

    void validate() const {
        if (values.size() != time * scales) throw std::logic_error("scalogram shape mismatch");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::logic_error("scalogram values must be finite and >= 0");
        for (std::size_t j = 1; j < freq_hz.size(); ++j)
            if (!(freq_hz[j] > freq_hz[j - 1])) throw std::logic_error("frequency map must be strictly increasing");
    }
};

// Analytic Morlet CWT evaluated in the frequency domain over a zero-padded
// buffer. Scales are log-spaced so center frequencies span [f_lo, f_hi].
inline Scalogram cwt(const std::vector<double>& x, int n_scales = kDefaultScales,
                     double f_lo = 0.5, double f_hi = 100.0, double fs = kSampleRateHz,
                     double omega0 = kMorletOmega0) {
    if (x.empty()) throw std::invalid_argument("empty input to cwt");
    if (n_scales < 2) throw std::invalid_argument("need at least 2 scales");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to cwt");

    const std::size_t n = x.size();
    const std::size_t m = next_pow2(2 * n);

    std::vector<std::complex<double>> spec(m, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) spec[i] = x[i];
    fft_inplace(spec, false);

    Scalogram sg;
    sg.time = n;
    sg.scales = static_cast<std::size_t>(n_scales);
    sg.values.assign(n * sg.scales, 0.0);
    sg.freq_hz.resize(sg.scales);
    sg.edge_width.resize(sg.scales);

    const double pi = std::numbers::pi;
    const double log_ratio = std::log(f_hi / f_lo);
    const double norm = std::pow(pi, -0.25) * std::sqrt(2.0 * pi);

    std::vector<std::complex<double>> band(m);
    for (std::size_t j = 0; j < sg.scales; ++j) {
        const double f = f_lo * std::exp(log_ratio * static_cast<double>(j) /
                                         static_cast<double>(sg.scales - 1));
        sg.freq_hz[j] = f;
        const double scale = omega0 * fs / (2.0 * pi * f); // samples
        sg.edge_width[j] = std::min(n / 2, static_cast<std::size_t>(std::ceil(2.0 * std::numbers::sqrt2 * scale)));

        // positive-frequency Gaussian window; negative bins stay zero (analytic wavelet)
        std::fill(band.begin(), band.end(), std::complex<double>{0.0, 0.0});
        const double amp = norm * std::sqrt(scale);
        for (std::size_t k = 1; k <= m / 2; ++k) {
            const double omega = 2.0 * pi * static_cast<double>(k) / static_cast<double>(m);
            const double d = scale * omega - omega0;
            const double w = amp * std::exp(-0.5 * d * d);
            band[k] = spec[k] * w;
        }
        fft_inplace(band, true);
        for (std::size_t t = 0; t < n; ++t) sg.values[t * sg.scales + j] = std::abs(band[t]);
    }
    return sg;
}

inline Scalogram cwt(const Segment& seg, int n_scales = kDefaultScales) {
    seg.validate();
    return cwt(seg.samples, n_scales);
}

// --- file format: "SCG1" | u32 time | u32 scales | f64 freq[scales] | f32 data ---

inline void save_scalogram(const Scalogram& sg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("SCG1", 4);
    const std::uint32_t t = static_cast<std::uint32_t>(sg.time), s = static_cast<std::uint32_t>(sg.scales);
    out.write(reinterpret_cast<const char*>(&t), 4);
    out.write(reinterpret_cast<const char*>(&s), 4);
    out.write(reinterpret_cast<const char*>(sg.freq_hz.data()),
              static_cast<std::streamsize>(sg.freq_hz.size() * sizeof(double)));
    std::vector<float> f32(sg.values.begin(), sg.values.end());
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
}

inline Scalogram load_scalogram(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "SCG1")
        throw std::runtime_error("bad scalogram magic in " + path.string());
    std::uint32_t t = 0, s = 0;
    in.read(reinterpret_cast<char*>(&t), 4);
    in.read(reinterpret_cast<char*>(&s), 4);
    Scalogram sg;
    sg.time = t;
    sg.scales = s;
    sg.freq_hz.resize(s);
    in.read(reinterpret_cast<char*>(sg.freq_hz.data()), static_cast<std::streamsize>(s * sizeof(double)));
    std::vector<float> f32(static_cast<std::size_t>(t) * s);
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!in) throw std::runtime_error("short read on " + path.string());
    sg.values.assign(f32.begin(), f32.end());
    sg.edge_width.assign(s, 0);
    return sg;
}

// Downsampled heat-map rendering; time bins averaged, low frequencies at the
// bottom.
inline SvgDoc render_scalogram(const Scalogram& sg, int width = 1024, int height = 384) {
    SvgDoc doc(width, height);
    const std::size_t tbins = std::min<std::size_t>(256, sg.time);
    const std::size_t step = sg.time / tbins;
    double vmax = 0.0;
    for (double v : sg.values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    const double cw = static_cast<double>(width) / static_cast<double>(tbins);
    const double ch = static_cast<double>(height) / static_cast<double>(sg.scales);
    for (std::size_t tb = 0; tb < tbins; ++tb) {
        for (std::size_t j = 0; j < sg.scales; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < step; ++k) acc += sg.at(tb * step + k, j);
            const double level = acc / (static_cast<double>(step) * vmax);
            const int heat = static_cast<int>(std::lround(255.0 * std::min(1.0, level)));
            char color[8];
            std::snprintf(color, sizeof color, "#%02x%02x%02x", heat, heat / 3, 255 - heat);
            doc.rect(cw * static_cast<double>(tb),
                     static_cast<double>(height) - ch * static_cast<double>(j + 1), cw + 0.5, ch + 0.5,
                     color);
        }
    }
    return doc;
}

} // namespace tamperlab::dsp
